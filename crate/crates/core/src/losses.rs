//! Training objectives and their gradients.
//!
//! Every `*_grad` function returns the loss value together with gradients
//! with respect to its image arguments. L1 kinks use the subgradient 0.

use serde::ser::{Serialize, SerializeMap, Serializer};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::imaging::{ssim_with_grad, upsample2x, upsample2x_adjoint, Plane, SsimConfig};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub kappa1: f64,
    pub kappa2: f64,
    pub ssim: SsimConfig,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kappa1: 5e-3,
            kappa2: 5e-2,
            ssim: SsimConfig::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.kappa1 && self.kappa1 < self.kappa2) {
            return Err(Error::Config(format!(
                "need 0 < kappa1 < kappa2, got {} and {}",
                self.kappa1, self.kappa2
            )));
        }
        self.ssim.validate()
    }
}

/// A composite loss with its named terms; `total` is their sum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossValue {
    terms: Vec<(&'static str, f64)>,
}

impl LossValue {
    pub fn push(&mut self, name: &'static str, value: f64) {
        self.terms.push((name, value));
    }

    pub fn total(&self) -> f64 {
        self.terms.iter().map(|(_, v)| v).sum()
    }

    pub fn terms(&self) -> &[(&'static str, f64)] {
        &self.terms
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    /// Element-wise accumulation of another value with the same term layout.
    pub(crate) fn accumulate(&mut self, other: &LossValue, weight: f64) {
        if self.terms.is_empty() {
            self.terms = other.terms.iter().map(|(n, v)| (*n, v * weight)).collect();
            return;
        }
        for ((_, a), (_, b)) in self.terms.iter_mut().zip(&other.terms) {
            *a += b * weight;
        }
    }
}

impl Serialize for LossValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.terms.len() + 1))?;
        map.serialize_entry("total", &self.total())?;
        for (n, v) in &self.terms {
            map.serialize_entry(n, v)?;
        }
        map.end()
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Negative mean windowed SSIM.
pub fn ssim_loss(x: &Plane, y: &Plane, cfg: &SsimConfig) -> Result<f64> {
    Ok(-crate::imaging::ssim(x, y, cfg)?)
}

/// [`ssim_loss`] with its gradient with respect to `x`.
pub fn ssim_loss_grad(x: &Plane, y: &Plane, cfg: &SsimConfig) -> Result<(f64, Plane)> {
    let (s, mut g) = ssim_with_grad(x, y, cfg)?;
    g.scale(-1.0);
    Ok((-s, g))
}

/// Mean absolute difference, negated: minimizing pushes `a` and `b` apart.
pub fn distance_loss(a: &Plane, b: &Plane) -> Result<f64> {
    Ok(-content_loss(a, b)?)
}

/// [`distance_loss`] with gradients with respect to `a` and `b`.
pub fn distance_loss_grad(a: &Plane, b: &Plane) -> Result<(f64, Plane, Plane)> {
    let (v, mut ga, mut gb) = content_loss_grad(a, b)?;
    ga.scale(-1.0);
    gb.scale(-1.0);
    Ok((-v, ga, gb))
}

/// Mean absolute error.
pub fn content_loss(x: &Plane, y: &Plane) -> Result<f64> {
    x.ensure_same_dims(y, "content loss")?;
    let n = x.len() as f64;
    Ok(x.data().iter().zip(y.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// [`content_loss`] with gradients with respect to `x` and `y`.
pub fn content_loss_grad(x: &Plane, y: &Plane) -> Result<(f64, Plane, Plane)> {
    x.ensure_same_dims(y, "content loss")?;
    let n = x.len() as f64;
    let (h, w) = x.dims();
    let mut gx = Plane::zeros(h, w);
    let mut total = 0.0;
    for (k, (a, b)) in x.data().iter().zip(y.data()).enumerate() {
        let d = a - b;
        total += d.abs();
        gx.data_mut()[k] = sign(d) / n;
    }
    let gy = gx.map(|v| -v);
    Ok((total / n, gx, gy))
}

/// The 8-neighbourhood offsets.
const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn gd_impl(x: &Plane, y: &Plane, want_grad: bool) -> Result<(f64, Option<Plane>)> {
    x.ensure_same_dims(y, "gradient difference loss")?;
    let (h, w) = x.dims();
    let n = (h * w) as f64;
    // differences of the residual r = x - y equal differences of gradients
    let r: Vec<f64> = x.data().iter().zip(y.data()).map(|(a, b)| a - b).collect();
    let mut grad = want_grad.then(|| Plane::zeros(h, w));
    let mut total = 0.0;
    for i in 0..h {
        for j in 0..w {
            let here = i * w + j;
            for (di, dj) in NEIGHBOURS {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                    continue;
                }
                let there = ni as usize * w + nj as usize;
                let d = r[here] - r[there];
                total += d.abs();
                if let Some(g) = grad.as_mut() {
                    let s = sign(d) / n;
                    g.data_mut()[here] += s;
                    g.data_mut()[there] -= s;
                }
            }
        }
    }
    Ok((total / n, grad))
}

/// Mean over pixels of the summed L1 mismatch of 8-neighbour differences.
/// Border pixels sum over the neighbours that exist.
pub fn gradient_difference_loss(x: &Plane, y: &Plane) -> Result<f64> {
    Ok(gd_impl(x, y, false)?.0)
}

/// [`gradient_difference_loss`] with gradients with respect to `x` and `y`.
pub fn gradient_difference_loss_grad(x: &Plane, y: &Plane) -> Result<(f64, Plane, Plane)> {
    let (v, g) = gd_impl(x, y, true)?;
    let gx = g.expect("gradient requested");
    let gy = gx.map(|v| -v);
    Ok((v, gx, gy))
}

/// `clip(0.2 / qf, kappa1, kappa2)`.
pub fn beta_for_qf(qf: u32, cfg: &LossConfig) -> Result<f64> {
    if qf < 1 {
        return Err(Error::Range("quality factor must be at least 1".into()));
    }
    Ok((0.2 / f64::from(qf)).clamp(cfg.kappa1, cfg.kappa2))
}

/// Generator objective for a fixed `beta`, with gradients for both descriptions.
pub fn mdgn_loss_grad_with_beta(
    a: &Plane,
    b: &Plane,
    target: &Plane,
    beta: f64,
    cfg: &LossConfig,
) -> Result<(LossValue, Plane, Plane)> {
    a.ensure_same_dims(b, "mdgn loss descriptions")?;
    if (2 * a.height(), 2 * a.width()) != target.dims() {
        return Err(Error::Shape(format!(
            "descriptions {:?} are not half of target {:?}",
            a.dims(),
            target.dims()
        )));
    }
    let (sa, ga_up) = ssim_loss_grad(&upsample2x(a), target, &cfg.ssim)?;
    let (sb, gb_up) = ssim_loss_grad(&upsample2x(b), target, &cfg.ssim)?;
    let (dist, mut gda, mut gdb) = distance_loss_grad(a, b)?;
    let mut ga = upsample2x_adjoint(&ga_up);
    let mut gb = upsample2x_adjoint(&gb_up);
    gda.scale(beta);
    gdb.scale(beta);
    ga.add_assign(&gda);
    gb.add_assign(&gdb);

    let mut value = LossValue::default();
    value.push("ssim_a", sa);
    value.push("ssim_b", sb);
    value.push("distance", beta * dist);
    Ok((value, ga, gb))
}

/// `ssim_loss(u(a), I) + ssim_loss(u(b), I) + beta(qf) * distance_loss(a, b)`.
pub fn mdgn_loss(a: &Plane, b: &Plane, target: &Plane, qf: u32, cfg: &LossConfig) -> Result<LossValue> {
    Ok(mdgn_loss_grad(a, b, target, qf, cfg)?.0)
}

pub fn mdgn_loss_grad(
    a: &Plane,
    b: &Plane,
    target: &Plane,
    qf: u32,
    cfg: &LossConfig,
) -> Result<(LossValue, Plane, Plane)> {
    let beta = beta_for_qf(qf, cfg)?;
    mdgn_loss_grad_with_beta(a, b, target, beta, cfg)
}

/// Content plus gradient-difference loss of three reconstructions against
/// their references; gradients are with respect to the reconstructions.
fn triple_loss_grad(names: [&'static str; 6], refs: [&Plane; 3], outs: [&Plane; 3]) -> Result<(LossValue, [Plane; 3])> {
    let mut value = LossValue::default();
    let mut grads = Vec::with_capacity(3);
    for k in 0..3 {
        let (c, _, mut gc) = content_loss_grad(refs[k], outs[k])?;
        let (g, _, gg) = gradient_difference_loss_grad(refs[k], outs[k])?;
        value.push(names[2 * k], c);
        value.push(names[2 * k + 1], g);
        gc.add_assign(&gg);
        grads.push(gc);
    }
    let [a, b, c]: [Plane; 3] = grads.try_into().expect("three gradients");
    Ok((value, [a, b, c]))
}

const MDRN_TERMS: [&str; 6] = [
    "content_a",
    "gradient_a",
    "content_b",
    "gradient_b",
    "content_c",
    "gradient_c",
];

/// Reconstruction objective summed over the two side outputs and the central one.
pub fn mdrn_loss(target: &Plane, out_a: &Plane, out_b: &Plane, out_c: &Plane) -> Result<LossValue> {
    Ok(mdrn_loss_grad(target, out_a, out_b, out_c)?.0)
}

pub fn mdrn_loss_grad(target: &Plane, out_a: &Plane, out_b: &Plane, out_c: &Plane) -> Result<(LossValue, [Plane; 3])> {
    triple_loss_grad(MDRN_TERMS, [target, target, target], [out_a, out_b, out_c])
}

/// Virtual-codec mimicry objective. `targets` are treated as constants.
pub fn mdvcn_loss(targets: [&Plane; 3], virtuals: [&Plane; 3]) -> Result<LossValue> {
    Ok(mdvcn_loss_grad(targets, virtuals)?.0)
}

pub fn mdvcn_loss_grad(targets: [&Plane; 3], virtuals: [&Plane; 3]) -> Result<(LossValue, [Plane; 3])> {
    triple_loss_grad(MDRN_TERMS, targets, virtuals)
}
