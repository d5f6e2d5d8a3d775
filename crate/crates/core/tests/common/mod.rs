#![allow(dead_code)]

use mdc_core::{ImageTensor, Plane};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |_, _| rng.random::<f64>())
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageTensor {
    ImageTensor::new(random_plane(rng, h, w)).unwrap()
}

/// Smooth random image: a few low-frequency cosines, kept inside [0, 1].
pub fn smooth_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageTensor {
    let terms: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.03..0.1),
            )
        })
        .collect();
    let p = Plane::from_fn(h, w, |i, j| {
        let (y, x) = (i as f64 / h as f64, j as f64 / w as f64);
        0.5 + terms
            .iter()
            .map(|(fy, fx, ph, a)| a * (std::f64::consts::TAU * (fy * y + fx * x) + ph).cos())
            .sum::<f64>()
    });
    ImageTensor::new(p).unwrap()
}

/// Central difference of `f` with respect to pixel `k` of `p`.
pub fn central_difference(p: &Plane, k: usize, h: f64, f: impl Fn(&Plane) -> f64) -> f64 {
    let mut plus = p.clone();
    plus.data_mut()[k] += h;
    let mut minus = p.clone();
    minus.data_mut()[k] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Relative error with an absolute floor for near-zero gradients.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Flattened view of a list of layer gradients.
pub fn flatten(layers: &[mdc_core::networks::ConvLayer]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.values().copied()).collect()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-window SSIM written with plain loops over every valid window position.
pub fn brute_force_ssim(x: &Plane, y: &Plane, window: usize, c1: f64, c2: f64) -> f64 {
    let (h, w) = x.dims();
    let n = (window * window) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - window {
        for c in 0..=w - window {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in r..r + window {
                for j in c..c + window {
                    mx += x.get(i, j);
                    my += y.get(i, j);
                }
            }
            mx /= n;
            my /= n;
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in r..r + window {
                for j in c..c + window {
                    let dx = x.get(i, j) - mx;
                    let dy = y.get(i, j) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cov += dx * dy;
                }
            }
            vx /= n;
            vy /= n;
            cov /= n;
            total += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Gradient-difference loss summed over every ordered pair of 8-connected
/// neighbours, normalised by the pixel count.
pub fn brute_force_gradient_difference(x: &Plane, y: &Plane) -> f64 {
    let (h, w) = x.dims();
    let mut total = 0.0;
    for i in 0..h as isize {
        for j in 0..w as isize {
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let (ni, nj) = (i + di, j + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                        continue;
                    }
                    let (p, q) = ((i as usize, j as usize), (ni as usize, nj as usize));
                    let gx = x.get(p.0, p.1) - x.get(q.0, q.1);
                    let gy = y.get(p.0, p.1) - y.get(q.0, q.1);
                    total += (gx - gy).abs();
                }
            }
        }
    }
    total / (h * w) as f64
}

/// Bilinear 2x resize with half-pixel centres and edge clamping, evaluated
/// directly from source coordinates.
pub fn reference_bilinear_2x(src: &Plane) -> Plane {
    let (h, w) = src.dims();
    let coord = |o: usize, n: usize| -> (usize, usize, f64) {
        let s = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        (lo, hi, s - lo as f64)
    };
    Plane::from_fn(2 * h, 2 * w, |i, j| {
        let (r0, r1, ty) = coord(i, h);
        let (c0, c1, tx) = coord(j, w);
        let top = src.get(r0, c0) * (1.0 - tx) + src.get(r0, c1) * tx;
        let bottom = src.get(r1, c0) * (1.0 - tx) + src.get(r1, c1) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}
