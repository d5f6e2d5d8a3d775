//! Mean SSIM over a uniform (average-pooling) window, stride 1, valid
//! positions only, with its exact gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Plane;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsimConfig {
    pub c1: f64,
    pub c2: f64,
    pub window: usize,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            c1: 1e-4,
            c2: 9e-4,
            window: 8,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Config(format!(
                "ssim constants must be positive (c1={}, c2={})",
                self.c1, self.c2
            )));
        }
        if self.window < 2 {
            return Err(Error::Config(format!(
                "ssim window must be at least 2, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Summed-area table with a zero top row and left column.
struct Integral {
    stride: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(h: usize, w: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut sums = vec![0.0; (h + 1) * stride];
        for i in 0..h {
            let mut row = 0.0;
            for j in 0..w {
                row += value(i * w + j);
                sums[(i + 1) * stride + j + 1] = sums[i * stride + j + 1] + row;
            }
        }
        Integral { stride, sums }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1`.
    #[inline]
    fn rect(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
        let s = self.stride;
        self.sums[r1 * s + c1] - self.sums[r0 * s + c1] - self.sums[r1 * s + c0] + self.sums[r0 * s + c0]
    }
}

struct Windows {
    rows: usize,
    cols: usize,
}

fn windows(x: &Plane, y: &Plane, cfg: &SsimConfig) -> Result<Windows> {
    cfg.validate()?;
    x.ensure_same_dims(y, "ssim")?;
    let (h, w) = x.dims();
    if h < cfg.window || w < cfg.window {
        return Err(Error::Shape(format!(
            "ssim window {} does not fit a {h}x{w} image",
            cfg.window
        )));
    }
    Ok(Windows {
        rows: h - cfg.window + 1,
        cols: w - cfg.window + 1,
    })
}

/// Per-window statistics; `moments[p] = (mu_x, mu_y, var_x, var_y, cov)`.
fn window_moments(x: &Plane, y: &Plane, cfg: &SsimConfig, win: &Windows) -> Vec<[f64; 5]> {
    let (h, w) = x.dims();
    let (xd, yd) = (x.data(), y.data());
    let sx = Integral::new(h, w, |k| xd[k]);
    let sy = Integral::new(h, w, |k| yd[k]);
    let sxx = Integral::new(h, w, |k| xd[k] * xd[k]);
    let syy = Integral::new(h, w, |k| yd[k] * yd[k]);
    let sxy = Integral::new(h, w, |k| xd[k] * yd[k]);
    let k = cfg.window;
    let n = (k * k) as f64;
    let mut out = Vec::with_capacity(win.rows * win.cols);
    for r in 0..win.rows {
        for c in 0..win.cols {
            let mx = sx.rect(r, c, r + k, c + k) / n;
            let my = sy.rect(r, c, r + k, c + k) / n;
            let vx = sxx.rect(r, c, r + k, c + k) / n - mx * mx;
            let vy = syy.rect(r, c, r + k, c + k) / n - my * my;
            let cv = sxy.rect(r, c, r + k, c + k) / n - mx * my;
            out.push([mx, my, vx, vy, cv]);
        }
    }
    out
}

#[inline]
fn ssim_terms(m: &[f64; 5], cfg: &SsimConfig) -> (f64, f64, f64, f64) {
    let [mx, my, vx, vy, cv] = *m;
    let a1 = 2.0 * mx * my + cfg.c1;
    let a2 = 2.0 * cv + cfg.c2;
    let b1 = mx * mx + my * my + cfg.c1;
    let b2 = vx + vy + cfg.c2;
    (a1, a2, b1, b2)
}

/// Mean SSIM over all valid window positions.
pub fn ssim(x: &Plane, y: &Plane, cfg: &SsimConfig) -> Result<f64> {
    let win = windows(x, y, cfg)?;
    let moments = window_moments(x, y, cfg, &win);
    let total: f64 = moments
        .iter()
        .map(|m| {
            let (a1, a2, b1, b2) = ssim_terms(m, cfg);
            (a1 * a2) / (b1 * b2)
        })
        .sum();
    Ok(total / moments.len() as f64)
}

/// Mean SSIM and its gradient with respect to `x`.
pub(crate) fn ssim_with_grad(x: &Plane, y: &Plane, cfg: &SsimConfig) -> Result<(f64, Plane)> {
    let win = windows(x, y, cfg)?;
    let moments = window_moments(x, y, cfg, &win);
    let k = cfg.window;
    let n = (k * k) as f64;
    let positions = moments.len() as f64;

    // dS/dx_i = (alpha_p + beta_p * x_i + gamma_p * y_i) / n, summed over windows p containing i.
    let mut alpha = Vec::with_capacity(moments.len());
    let mut beta = Vec::with_capacity(moments.len());
    let mut gamma = Vec::with_capacity(moments.len());
    let mut total = 0.0;
    for m in &moments {
        let (a1, a2, b1, b2) = ssim_terms(m, cfg);
        let s = (a1 * a2) / (b1 * b2);
        total += s;
        let [mx, my, _, _, _] = *m;
        let d_mu = 2.0 * my * a2 / (b1 * b2) - s * 2.0 * mx / b1;
        let d_var = -s / b2;
        let d_cov = 2.0 * a1 / (b1 * b2);
        alpha.push(d_mu - 2.0 * d_var * mx - d_cov * my);
        beta.push(2.0 * d_var);
        gamma.push(d_cov);
    }

    let (h, w) = x.dims();
    let (rows, cols) = (win.rows, win.cols);
    let ia = Integral::new(rows, cols, |p| alpha[p]);
    let ib = Integral::new(rows, cols, |p| beta[p]);
    let ig = Integral::new(rows, cols, |p| gamma[p]);
    let scale = 1.0 / (n * positions);
    let grad = Plane::from_fn(h, w, |i, j| {
        // windows p=(r,c) with r <= i < r+k, clipped to valid positions
        let r0 = (i + 1).saturating_sub(k);
        let r1 = (i + 1).min(rows);
        let c0 = (j + 1).saturating_sub(k);
        let c1 = (j + 1).min(cols);
        if r0 >= r1 || c0 >= c1 {
            return 0.0;
        }
        let a = ia.rect(r0, c0, r1, c1);
        let b = ib.rect(r0, c0, r1, c1);
        let g = ig.rect(r0, c0, r1, c1);
        (a + b * x.get(i, j) + g * y.get(i, j)) * scale
    });
    Ok((total / positions, grad))
}
