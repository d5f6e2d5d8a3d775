//! Per-sample gradients for each sub-problem and dataset-wide evaluation.

use rayon::prelude::*;

use crate::codec::{decode, encode, CodecConfig};
use crate::error::Result;
use crate::imaging::Plane;
use crate::losses::{mdgn_loss_grad_with_beta, mdrn_loss_grad, mdvcn_loss_grad, LossConfig, LossValue};
use crate::networks::{
    generator_backward, generator_forward, generator_infer, reconstruction_backward, reconstruction_forward,
    reconstruction_infer, ConvLayer, ModelBundle, NetworkParams,
};

pub type Grads = Vec<ConvLayer>;
pub type Pair = (Plane, Plane);

/// Which networks stand in for "codec then reconstruction" inside the
/// generator's differentiable graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconstructionPath {
    /// The virtual-codec networks (theta) on the lossless descriptions.
    Virtual,
    /// The real reconstruction networks (alpha) on the lossless descriptions,
    /// i.e. with the codec bypassed. Only meaningful as a reference.
    Lossless,
}

fn merge(mut a: LossValue, b: &LossValue) -> LossValue {
    for (n, v) in b.terms() {
        a.push(n, *v);
    }
    a
}

/// Generator loss (description objective plus reconstruction objective
/// through `path`) and its gradient with respect to the generator weights.
pub fn generator_gradient(
    bundle: &ModelBundle,
    target: &Plane,
    beta: f64,
    loss_cfg: &LossConfig,
    path: ReconstructionPath,
) -> Result<(LossValue, Grads)> {
    let trace = generator_forward(&bundle.omega, target)?;
    let (a, b) = (trace.description_a(), trace.description_b());
    let (desc_loss, mut ga, mut gb) = mdgn_loss_grad_with_beta(&a, &b, target, beta, loss_cfg)?;
    let nets = match path {
        ReconstructionPath::Virtual => &bundle.theta,
        ReconstructionPath::Lossless => &bundle.alpha,
    };
    let ta = reconstruction_forward(&nets[0], &[&a])?;
    let tb = reconstruction_forward(&nets[1], &[&b])?;
    let tc = reconstruction_forward(&nets[2], &[&a, &b])?;
    let oa = ta.output().clone().into_plane();
    let ob = tb.output().clone().into_plane();
    let oc = tc.output().clone().into_plane();
    let (rec_loss, [g1, g2, g3]) = mdrn_loss_grad(target, &oa, &ob, &oc)?;
    let (ia, _) = reconstruction_backward(&nets[0], &ta, &g1, true)?;
    let (ib, _) = reconstruction_backward(&nets[1], &tb, &g2, true)?;
    let (ic, _) = reconstruction_backward(&nets[2], &tc, &g3, true)?;
    let (ia, ib, ic) = (ia.expect("requested"), ib.expect("requested"), ic.expect("requested"));
    add_channel(&mut ga, &ia.channel_plane(0));
    add_channel(&mut ga, &ic.channel_plane(0));
    add_channel(&mut gb, &ib.channel_plane(0));
    add_channel(&mut gb, &ic.channel_plane(1));
    let grads = generator_backward(&bundle.omega, &trace, &ga, &gb)?;
    Ok((merge(desc_loss, &rec_loss), grads))
}

fn add_channel(dst: &mut Plane, src: &Plane) {
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}

/// Loss and gradient of the description objective alone (no reconstruction term).
pub fn description_gradient(
    omega: &NetworkParams,
    target: &Plane,
    beta: f64,
    loss_cfg: &LossConfig,
) -> Result<(LossValue, Grads)> {
    let trace = generator_forward(omega, target)?;
    let (a, b) = (trace.description_a(), trace.description_b());
    let (loss, ga, gb) = mdgn_loss_grad_with_beta(&a, &b, target, beta, loss_cfg)?;
    Ok((loss, generator_backward(omega, &trace, &ga, &gb)?))
}

/// Reconstruction loss of three networks against their references, with
/// parameter gradients. `inputs` are the network inputs `(a, b)`.
fn triple_gradient(
    nets: &[NetworkParams; 3],
    inputs: (&Plane, &Plane),
    references: [&Plane; 3],
    mimicry: bool,
) -> Result<(LossValue, [Grads; 3])> {
    let (a, b) = inputs;
    let ta = reconstruction_forward(&nets[0], &[a])?;
    let tb = reconstruction_forward(&nets[1], &[b])?;
    let tc = reconstruction_forward(&nets[2], &[a, b])?;
    let oa = ta.output().clone().into_plane();
    let ob = tb.output().clone().into_plane();
    let oc = tc.output().clone().into_plane();
    let (loss, [g1, g2, g3]) = if mimicry {
        mdvcn_loss_grad(references, [&oa, &ob, &oc])?
    } else {
        mdrn_loss_grad(references[0], &oa, &ob, &oc)?
    };
    let ((_, p1), ((_, p2), (_, p3))) = rayon::join(
        || reconstruction_backward(&nets[0], &ta, &g1, false).expect("shapes checked on forward"),
        || {
            rayon::join(
                || reconstruction_backward(&nets[1], &tb, &g2, false).expect("shapes checked on forward"),
                || reconstruction_backward(&nets[2], &tc, &g3, false).expect("shapes checked on forward"),
            )
        },
    );
    Ok((loss, [p1, p2, p3]))
}

/// Reconstruction objective on decoded descriptions, gradients for alpha.
pub fn mdrn_gradient(alpha: &[NetworkParams; 3], target: &Plane, decoded: &Pair) -> Result<(LossValue, [Grads; 3])> {
    triple_gradient(alpha, (&decoded.0, &decoded.1), [target, target, target], false)
}

/// Mimicry objective: virtual networks on lossless descriptions against the
/// (constant) reconstructions, gradients for theta.
pub fn mdvcn_gradient(
    theta: &[NetworkParams; 3],
    lossless: &Pair,
    reconstructions: &[Plane; 3],
) -> Result<(LossValue, [Grads; 3])> {
    let [ra, rb, rc] = reconstructions;
    triple_gradient(theta, (&lossless.0, &lossless.1), [ra, rb, rc], true)
}

/// Simultaneous gradients of one joint step: alpha from the real decoded
/// descriptions, omega through the virtual codec. `decoded` never enters
/// omega's graph.
pub struct JointGradients {
    pub omega_loss: LossValue,
    pub omega: Grads,
    pub alpha_loss: LossValue,
    pub alpha: [Grads; 3],
}

pub fn joint_gradients(
    bundle: &ModelBundle,
    target: &Plane,
    decoded: &Pair,
    beta: f64,
    loss_cfg: &LossConfig,
) -> Result<JointGradients> {
    let (omega_res, alpha_res) = rayon::join(
        || generator_gradient(bundle, target, beta, loss_cfg, ReconstructionPath::Virtual),
        || mdrn_gradient(&bundle.alpha, target, decoded),
    );
    let (omega_loss, omega) = omega_res?;
    let (alpha_loss, alpha) = alpha_res?;
    Ok(JointGradients {
        omega_loss,
        omega,
        alpha_loss,
        alpha,
    })
}

/// Mean of per-sample gradients (summed in sample order).
pub(crate) fn mean_grads(mut parts: Vec<Grads>) -> Grads {
    let n = parts.len() as f64;
    let mut acc = parts.remove(0);
    for p in &parts {
        for (a, b) in acc.iter_mut().zip(p) {
            a.add_assign(b);
        }
    }
    acc.iter_mut().for_each(|l| l.scale(1.0 / n));
    acc
}

pub(crate) fn mean_loss<'a>(values: impl IntoIterator<Item = &'a LossValue>) -> LossValue {
    let values: Vec<&LossValue> = values.into_iter().collect();
    let w = 1.0 / values.len() as f64;
    let mut out = LossValue::default();
    for v in values {
        out.accumulate(v, w);
    }
    out
}

/// Splits per-sample triple gradients into per-network means.
pub(crate) fn mean_triple(parts: Vec<[Grads; 3]>) -> [Grads; 3] {
    let mut per_net: [Vec<Grads>; 3] = Default::default();
    for [a, b, c] in parts {
        per_net[0].push(a);
        per_net[1].push(b);
        per_net[2].push(c);
    }
    per_net.map(mean_grads)
}

/// Generator outputs for every target, clamped to `[0, 1]`.
pub fn generate_descriptions(omega: &NetworkParams, targets: &[Plane]) -> Result<Vec<Pair>> {
    targets
        .par_iter()
        .map(|t| {
            let (a, b) = generator_infer(omega, t)?;
            Ok((a.clamped().into_plane(), b.clamped().into_plane()))
        })
        .collect()
}

pub fn compress_pair(pair: &Pair, codec: &CodecConfig) -> Result<Pair> {
    let code = |p: &Plane| -> Result<Plane> {
        let img = p.clamped();
        Ok(decode(&encode(&img, codec)?)?.into_plane())
    };
    Ok((code(&pair.0)?, code(&pair.1)?))
}

pub fn compress_all(pairs: &[Pair], codec: &CodecConfig) -> Result<Vec<Pair>> {
    pairs.par_iter().map(|p| compress_pair(p, codec)).collect()
}

/// Raw (unclamped) side and central reconstructions.
pub fn reconstruct(nets: &[NetworkParams; 3], inputs: &Pair) -> Result<[Plane; 3]> {
    Ok([
        reconstruction_infer(&nets[0], &[&inputs.0])?,
        reconstruction_infer(&nets[1], &[&inputs.1])?,
        reconstruction_infer(&nets[2], &[&inputs.0, &inputs.1])?,
    ])
}

pub fn reconstruct_all(nets: &[NetworkParams; 3], inputs: &[Pair]) -> Result<Vec<[Plane; 3]>> {
    inputs.par_iter().map(|p| reconstruct(nets, p)).collect()
}

fn mean_total(values: Vec<f64>) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Dataset mean of the reconstruction objective.
pub fn eval_mdrn(alpha: &[NetworkParams; 3], targets: &[Plane], decoded: &[Pair]) -> Result<f64> {
    let v: Result<Vec<f64>> = targets
        .par_iter()
        .zip(decoded)
        .map(|(t, d)| {
            let [a, b, c] = reconstruct(alpha, d)?;
            Ok(crate::losses::mdrn_loss(t, &a, &b, &c)?.total())
        })
        .collect();
    Ok(mean_total(v?))
}

/// Dataset mean of the mimicry objective.
pub fn eval_mdvcn(theta: &[NetworkParams; 3], lossless: &[Pair], recon: &[[Plane; 3]]) -> Result<f64> {
    let v: Result<Vec<f64>> = lossless
        .par_iter()
        .zip(recon)
        .map(|(d, r)| {
            let [a, b, c] = reconstruct(theta, d)?;
            Ok(crate::losses::mdvcn_loss([&r[0], &r[1], &r[2]], [&a, &b, &c])?.total())
        })
        .collect();
    Ok(mean_total(v?))
}

/// Dataset mean of the generator objective through the virtual codec.
pub fn eval_generator(bundle: &ModelBundle, targets: &[Plane], beta: f64, loss_cfg: &LossConfig) -> Result<f64> {
    let v: Result<Vec<f64>> = targets
        .par_iter()
        .map(|t| {
            let (a, b) = generator_infer(&bundle.omega, t)?;
            let desc = crate::losses::mdgn_loss_grad_with_beta(&a, &b, t, beta, loss_cfg)?.0;
            let [ra, rb, rc] = reconstruct(&bundle.theta, &(a, b))?;
            Ok(desc.total() + crate::losses::mdrn_loss(t, &ra, &rb, &rc)?.total())
        })
        .collect();
    Ok(mean_total(v?))
}
