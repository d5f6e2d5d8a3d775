use crate::imaging::{ImageTensor, Plane};

/// One output sample of a 1-D linear interpolation: `x[lo] + t * (x[hi] - x[lo])`.
#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    t: f64,
}

/// Half-pixel-centred 2x taps with edge replication.
fn taps_2x(n: usize) -> Vec<Tap> {
    let mut taps = Vec::with_capacity(2 * n);
    for k in 0..n {
        taps.push(Tap {
            lo: k,
            hi: k.saturating_sub(1),
            t: 0.25,
        });
        taps.push(Tap {
            lo: k,
            hi: (k + 1).min(n - 1),
            t: 0.25,
        });
    }
    taps
}

/// Bilinear 2x up-sampling without clamping; used inside differentiable graphs.
pub fn upsample2x(src: &Plane) -> Plane {
    let (h, w) = src.dims();
    let (rows, cols) = (taps_2x(h), taps_2x(w));
    let mut horiz = Plane::zeros(h, 2 * w);
    for i in 0..h {
        for (j, tap) in cols.iter().enumerate() {
            let lo = src.get(i, tap.lo);
            horiz.set(i, j, lo + tap.t * (src.get(i, tap.hi) - lo));
        }
    }
    let mut out = Plane::zeros(2 * h, 2 * w);
    for (i, tap) in rows.iter().enumerate() {
        for j in 0..2 * w {
            let lo = horiz.get(tap.lo, j);
            out.set(i, j, lo + tap.t * (horiz.get(tap.hi, j) - lo));
        }
    }
    out
}

/// Adjoint of [`upsample2x`]: maps a gradient on the 2x grid back to the source grid.
pub fn upsample2x_adjoint(grad: &Plane) -> Plane {
    let (h2, w2) = grad.dims();
    let (h, w) = (h2 / 2, w2 / 2);
    let (rows, cols) = (taps_2x(h), taps_2x(w));
    let mut horiz = Plane::zeros(h, w2);
    for (i, tap) in rows.iter().enumerate() {
        for j in 0..w2 {
            let g = grad.get(i, j);
            let d = horiz.data_mut();
            d[tap.lo * w2 + j] += (1.0 - tap.t) * g;
            d[tap.hi * w2 + j] += tap.t * g;
        }
    }
    let mut out = Plane::zeros(h, w);
    for i in 0..h {
        for (j, tap) in cols.iter().enumerate() {
            let g = horiz.get(i, j);
            let d = out.data_mut();
            d[i * w + tap.lo] += (1.0 - tap.t) * g;
            d[i * w + tap.hi] += tap.t * g;
        }
    }
    out
}

/// Bilinear 2x up-sampling of an image; the result is clamped to `[0, 1]`.
pub fn upsample_linear(image: &ImageTensor) -> ImageTensor {
    upsample2x(image).clamped()
}
