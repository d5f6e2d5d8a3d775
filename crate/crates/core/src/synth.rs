//! Deterministic synthetic grayscale scenes: a shaded background with
//! overlapping hard-edged shapes, stripes and fine texture, quantized to 8 bits.
//! Used for toy training runs and tests when no photo corpus is at hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{ImageTensor, Plane};

enum Shape {
    Ellipse {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
        value: f64,
    },
    Rect {
        y0: f64,
        x0: f64,
        y1: f64,
        x1: f64,
        value: f64,
    },
    Stripes {
        angle: f64,
        period: f64,
        amp: f64,
        y0: f64,
        x0: f64,
        radius: f64,
    },
}

pub fn synthetic_scene(height: usize, width: usize, seed: u64) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let base = rng.random_range(0.25..0.75);
    let gy = rng.random_range(-0.3..0.3) / h;
    let gx = rng.random_range(-0.3..0.3) / w;

    let n = rng.random_range(6..14);
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let cy = rng.random_range(0.0..h);
        let cx = rng.random_range(0.0..w);
        let value = rng.random_range(0.05..0.95);
        shapes.push(match rng.random_range(0..3) {
            0 => Shape::Ellipse {
                cy,
                cx,
                ry: rng.random_range(0.05..0.35) * h,
                rx: rng.random_range(0.05..0.35) * w,
                value,
            },
            1 => {
                let hh = rng.random_range(0.05..0.3) * h;
                let hw = rng.random_range(0.05..0.3) * w;
                Shape::Rect {
                    y0: cy - hh,
                    x0: cx - hw,
                    y1: cy + hh,
                    x1: cx + hw,
                    value,
                }
            }
            _ => Shape::Stripes {
                angle: rng.random_range(0.0..std::f64::consts::PI),
                period: rng.random_range(3.0..10.0),
                amp: rng.random_range(0.05..0.2),
                y0: cy,
                x0: cx,
                radius: rng.random_range(0.15..0.4) * h.min(w),
            },
        });
    }
    let texture_amp = rng.random_range(0.0..0.04);
    let tex_seed: u64 = rng.random();

    let plane = Plane::from_fn(height, width, |i, j| {
        let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
        let mut v = base + gy * (y - h / 2.0) + gx * (x - w / 2.0);
        for s in &shapes {
            match *s {
                Shape::Ellipse { cy, cx, ry, rx, value } => {
                    let d = ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2);
                    if d <= 1.0 {
                        v = value + 0.1 * (1.0 - d) * (value - 0.5).signum();
                    }
                }
                Shape::Rect { y0, x0, y1, x1, value } => {
                    if (y0..y1).contains(&y) && (x0..x1).contains(&x) {
                        v = value;
                    }
                }
                Shape::Stripes {
                    angle,
                    period,
                    amp,
                    y0,
                    x0,
                    radius,
                } => {
                    let (dy, dx) = (y - y0, x - x0);
                    if dy * dy + dx * dx <= radius * radius {
                        let t = dx * angle.cos() + dy * angle.sin();
                        v += amp * (2.0 * std::f64::consts::PI * t / period).sin();
                    }
                }
            }
        }
        let hash = (i as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
            ^ tex_seed;
        let noise = ((hash.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 40) as f64 / (1u64 << 24) as f64) - 0.5;
        let v = (v + texture_amp * noise).clamp(0.0, 1.0);
        (v * 255.0).round() / 255.0
    });
    ImageTensor::new(plane).expect("clamped scene")
}

/// `count` named scenes with seeds `seed, seed + 1, ...`.
pub fn synthetic_corpus(count: usize, height: usize, width: usize, seed: u64) -> Vec<(String, ImageTensor)> {
    (0..count)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            (format!("synth_{s:05}"), synthetic_scene(height, width, s))
        })
        .collect()
}
