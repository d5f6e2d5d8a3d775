//! Diagonal poly-phase splitting: description A takes the top-left sample of
//! every 2x2 block, description B the bottom-right one.

use crate::error::{Error, Result};
use crate::imaging::{DescriptionPair, ImageTensor, Plane};

pub fn polyphase_split(image: &ImageTensor) -> Result<DescriptionPair> {
    let (a, b) = split_plane(image)?;
    Ok(DescriptionPair {
        a: ImageTensor::new(a)?,
        b: ImageTensor::new(b)?,
    })
}

pub(crate) fn split_plane(image: &Plane) -> Result<(Plane, Plane)> {
    let (h, w) = image.dims();
    if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
        return Err(Error::Shape(format!(
            "poly-phase split needs even, non-zero dimensions, got {h}x{w}"
        )));
    }
    let a = Plane::from_fn(h / 2, w / 2, |i, j| image.get(2 * i, 2 * j));
    let b = Plane::from_fn(h / 2, w / 2, |i, j| image.get(2 * i + 1, 2 * j + 1));
    Ok((a, b))
}

/// Mask of positions filled by [`polyphase_embed`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseMask {
    height: usize,
    width: usize,
    filled: Vec<bool>,
}

impl PhaseMask {
    pub fn is_filled(&self, i: usize, j: usize) -> bool {
        self.filled[i * self.width + j]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn density(&self) -> f64 {
        let n = self.filled.iter().filter(|&&f| f).count();
        n as f64 / self.filled.len() as f64
    }
}

/// Places the two descriptions back on their sampling grid, zero elsewhere.
pub fn polyphase_embed(pair: &DescriptionPair) -> Result<(ImageTensor, PhaseMask)> {
    pair.a.ensure_same_dims(&pair.b, "poly-phase embed")?;
    let (h, w) = pair.a.dims();
    let (mh, mw) = (2 * h, 2 * w);
    let mut out = Plane::zeros(mh, mw);
    let mut filled = vec![false; mh * mw];
    for i in 0..h {
        for j in 0..w {
            out.set(2 * i, 2 * j, pair.a.get(i, j));
            out.set(2 * i + 1, 2 * j + 1, pair.b.get(i, j));
            filled[2 * i * mw + 2 * j] = true;
            filled[(2 * i + 1) * mw + 2 * j + 1] = true;
        }
    }
    let mask = PhaseMask {
        height: mh,
        width: mw,
        filled,
    };
    Ok((ImageTensor::new(out)?, mask))
}
