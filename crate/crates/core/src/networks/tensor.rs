use crate::error::{Error, Result};
use crate::imaging::Plane;

/// Channel-major feature map, `data[(c * height + i) * width + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_plane(p: &Plane) -> Self {
        Tensor {
            channels: 1,
            height: p.height(),
            width: p.width(),
            data: p.data().to_vec(),
        }
    }

    /// Stacks equally sized planes as channels.
    pub fn stack(planes: &[&Plane]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Shape("cannot stack zero planes".into()))?;
        let mut data = Vec::with_capacity(planes.len() * first.len());
        for p in planes {
            first.ensure_same_dims(p, "channel stack")?;
            data.extend_from_slice(p.data());
        }
        Ok(Tensor {
            channels: planes.len(),
            height: first.height(),
            width: first.width(),
            data,
        })
    }

    pub fn channel_plane(&self, c: usize) -> Plane {
        let n = self.height * self.width;
        Plane::new(self.height, self.width, self.data[c * n..(c + 1) * n].to_vec())
            .expect("channel slice has plane size")
    }

    pub fn into_plane(self) -> Plane {
        debug_assert_eq!(self.channels, 1);
        Plane::new(self.height, self.width, self.data).expect("single channel")
    }

    #[inline]
    pub fn spatial(&self) -> usize {
        self.height * self.width
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Row-major `c = op(a) * op(b)` (or `c += ...` when `accumulate`), where
/// `op(a)` is `m x k` and `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_transposed { (1, k) } else { (n, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return;
    }
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
