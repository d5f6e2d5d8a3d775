//! Joint training: the generator receives gradients through the virtual
//! codec while the reconstruction networks learn from real decoded data.

use rayon::prelude::*;

use crate::codec::CodecConfig;
use crate::error::Result;
use crate::imaging::{ImageTensor, Plane};
use crate::networks::{generator_infer, init_params_with_width, ModelBundle};
use crate::training::alg1::{mdrn_phase, mdvcn_phase, optimizers, planes, polyphase_pairs};
use crate::training::session::{guard, on_divergence, Session};
use crate::training::steps::{
    compress_all, compress_pair, eval_mdrn, generate_descriptions, joint_gradients, mdvcn_gradient, mean_grads,
    mean_loss, mean_triple, reconstruct, reconstruct_all, Pair,
};
use crate::training::{Optimizer, Trained, TrainingConfig};

pub fn train_algorithm2(patches: &[ImageTensor], cfg: &TrainingConfig) -> Result<Trained> {
    cfg.validate()?;
    train_algorithm2_from(init_params_with_width(cfg.seed, cfg.width), patches, cfg)
}

/// Joint training starting from an existing bundle.
pub fn train_algorithm2_from(
    mut bundle: ModelBundle,
    patches: &[ImageTensor],
    cfg: &TrainingConfig,
) -> Result<Trained> {
    cfg.validate()?;
    cfg.check_dataset(patches.len())?;
    bundle.validate()?;
    bundle.meta.qf = Some(cfg.qf);
    bundle.meta.seed = cfg.seed;
    bundle.meta.algorithm = Some(2);
    let mut session = Session::new(cfg, patches.len());
    match run(&mut bundle, &mut session, patches, cfg) {
        Ok(()) => Ok(Trained {
            bundle,
            log: session.log,
        }),
        Err(e) => Err(on_divergence(e, &bundle, cfg)),
    }
}

/// Dataset-wide reconstruction loss of the current real pipeline.
fn pipeline_loss(bundle: &ModelBundle, targets: &[Plane], codec: &CodecConfig) -> Result<f64> {
    let decoded = compress_all(&generate_descriptions(&bundle.omega, targets)?, codec)?;
    eval_mdrn(&bundle.alpha, targets, &decoded)
}

fn run(bundle: &mut ModelBundle, s: &mut Session, patches: &[ImageTensor], cfg: &TrainingConfig) -> Result<()> {
    let codec = CodecConfig::new(cfg.qf)?;
    let beta = cfg.beta()?;
    let targets = planes(patches);
    let nb = s.batches_per_epoch();
    let joint = cfg.joint_iterations * cfg.epochs_l * nb;
    let pre = cfg.pretrain_epochs * nb;
    let mut alpha_opts = optimizers(&bundle.alpha, cfg, pre + joint);
    let mut theta_opts = optimizers(&bundle.theta, cfg, pre + joint);
    let mut omega_opt = Optimizer::new(&bundle.omega, cfg.adam(), cfg.lr0, joint);

    // The virtual codec needs a reconstruction to mimic: warm the
    // reconstruction networks up on poly-phase descriptions first.
    let lossless = polyphase_pairs(patches)?;
    let decoded = compress_all(&lossless, &codec)?;
    mdrn_phase(
        s,
        bundle,
        &mut alpha_opts,
        &targets,
        &decoded,
        cfg.pretrain_epochs,
        "mdrn_warmup",
        0,
        cfg,
    )?;
    let recon = reconstruct_all(&bundle.alpha, &decoded)?;
    mdvcn_phase(
        s,
        bundle,
        &mut theta_opts,
        &lossless,
        &recon,
        cfg.pretrain_epochs,
        "mdvcn_pretrain",
        0,
        cfg,
    )?;

    for it in 0..cfg.joint_iterations {
        let start = pipeline_loss(bundle, &targets, &codec)?;
        let mut warned_epoch = None;
        let steps = s.run_epochs(cfg.epochs_l, |s, batch, epoch| {
            // (a) descriptions and their decoded versions
            let coded = batch
                .par_iter()
                .map(|&i| {
                    let (a, b) = generator_infer(&bundle.omega, &targets[i])?;
                    let lossless: Pair = (a.clamped().into_plane(), b.clamped().into_plane());
                    let decoded = compress_pair(&lossless, &codec)?;
                    Ok((lossless, decoded))
                })
                .collect::<Result<Vec<_>>>()?;

            // (b) simultaneous generator and reconstruction updates
            let parts = batch
                .par_iter()
                .zip(&coded)
                .map(|(&i, (_, decoded))| joint_gradients(bundle, &targets[i], decoded, beta, &cfg.loss))
                .collect::<Result<Vec<_>>>()?;
            let omega_loss = mean_loss(parts.iter().map(|p| &p.omega_loss));
            let alpha_loss = mean_loss(parts.iter().map(|p| &p.alpha_loss));
            guard(&omega_loss, cfg, "joint_mdgn", s.next_step())?;
            guard(&alpha_loss, cfg, "joint_mdrn", s.next_step())?;
            let (omega_grads, alpha_grads): (Vec<_>, Vec<_>) = parts.into_iter().map(|p| (p.omega, p.alpha)).unzip();
            let lr = omega_opt.apply(&mut bundle.omega, &mean_grads(omega_grads));
            let alpha_grads = mean_triple(alpha_grads);
            for k in 0..3 {
                alpha_opts[k].apply(&mut bundle.alpha[k], &alpha_grads[k]);
            }
            bundle.meta.steps.mdgn += 1;
            bundle.meta.steps.mdrn += 1;
            s.record("joint_mdgn", it, epoch, lr, omega_loss);
            s.record("joint_mdrn", it, epoch, lr, alpha_loss);

            // (c) reconstructions with the updated networks, (d) mimicry update
            let parts = coded
                .par_iter()
                .map(|(lossless, decoded)| {
                    let recon = reconstruct(&bundle.alpha, decoded)?;
                    mdvcn_gradient(&bundle.theta, lossless, &recon)
                })
                .collect::<Result<Vec<_>>>()?;
            let (losses, grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
            let loss = mean_loss(&losses);
            guard(&loss, cfg, "joint_mdvcn", s.next_step())?;
            if loss.total() > cfg.mimicry_warning && warned_epoch != Some(epoch) {
                warned_epoch = Some(epoch);
                s.warn(format!(
                    "virtual codec mimicry loss {:.4} exceeds {} at step {}; generator gradients may be unreliable",
                    loss.total(),
                    cfg.mimicry_warning,
                    s.next_step()
                ));
            }
            let grads = mean_triple(grads);
            for k in 0..3 {
                theta_opts[k].apply(&mut bundle.theta[k], &grads[k]);
            }
            bundle.meta.steps.mdvcn += 1;
            s.record("joint_mdvcn", it, epoch, lr, loss);
            Ok(())
        })?;
        let end = pipeline_loss(bundle, &targets, &codec)?;
        s.summarize("joint", it, steps, start, end);
    }
    Ok(())
}
