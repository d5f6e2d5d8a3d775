//! Alternating training: reconstruction, virtual codec, then generator with
//! the virtual codec frozen.

use rayon::prelude::*;

use crate::codec::CodecConfig;
use crate::error::Result;
use crate::imaging::{polyphase_split, ImageTensor, Plane};
use crate::networks::{init_params_with_width, ModelBundle, NetworkParams};
use crate::training::session::{guard, on_divergence, Session};
use crate::training::steps::{
    compress_all, description_gradient, eval_generator, eval_mdrn, eval_mdvcn, generate_descriptions,
    generator_gradient, mdrn_gradient, mdvcn_gradient, mean_grads, mean_loss, mean_triple, reconstruct_all, Pair,
    ReconstructionPath,
};
use crate::training::{Optimizer, Trained, TrainingConfig};

pub(crate) fn planes(patches: &[ImageTensor]) -> Vec<Plane> {
    patches.iter().map(|p| p.plane().clone()).collect()
}

pub(crate) fn polyphase_pairs(patches: &[ImageTensor]) -> Result<Vec<Pair>> {
    patches
        .iter()
        .map(|p| {
            let d = polyphase_split(p)?;
            Ok((d.a.into_plane(), d.b.into_plane()))
        })
        .collect()
}

pub(crate) fn optimizers(nets: &[NetworkParams; 3], cfg: &TrainingConfig, total: usize) -> [Optimizer; 3] {
    [0, 1, 2].map(|k| Optimizer::new(&nets[k], cfg.adam(), cfg.lr0, total))
}

/// Trains the reconstruction networks on decoded descriptions.
#[allow(clippy::too_many_arguments)]
pub(crate) fn mdrn_phase(
    s: &mut Session,
    bundle: &mut ModelBundle,
    opts: &mut [Optimizer; 3],
    targets: &[Plane],
    decoded: &[Pair],
    epochs: usize,
    phase: &str,
    iteration: usize,
    cfg: &TrainingConfig,
) -> Result<()> {
    let start = eval_mdrn(&bundle.alpha, targets, decoded)?;
    let steps = s.run_epochs(epochs, |s, batch, epoch| {
        let parts = batch
            .par_iter()
            .map(|&i| mdrn_gradient(&bundle.alpha, &targets[i], &decoded[i]))
            .collect::<Result<Vec<_>>>()?;
        let (losses, grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        let loss = mean_loss(&losses);
        guard(&loss, cfg, phase, s.next_step())?;
        let grads = mean_triple(grads);
        let mut lr = 0.0;
        for k in 0..3 {
            lr = opts[k].apply(&mut bundle.alpha[k], &grads[k]);
        }
        bundle.meta.steps.mdrn += 1;
        s.record(phase, iteration, epoch, lr, loss);
        Ok(())
    })?;
    let end = eval_mdrn(&bundle.alpha, targets, decoded)?;
    s.summarize(phase, iteration, steps, start, end);
    Ok(())
}

/// Trains the virtual codec to mimic the reconstructions from lossless
/// descriptions.
#[allow(clippy::too_many_arguments)]
pub(crate) fn mdvcn_phase(
    s: &mut Session,
    bundle: &mut ModelBundle,
    opts: &mut [Optimizer; 3],
    lossless: &[Pair],
    recon: &[[Plane; 3]],
    epochs: usize,
    phase: &str,
    iteration: usize,
    cfg: &TrainingConfig,
) -> Result<()> {
    let start = eval_mdvcn(&bundle.theta, lossless, recon)?;
    let steps = s.run_epochs(epochs, |s, batch, epoch| {
        let parts = batch
            .par_iter()
            .map(|&i| mdvcn_gradient(&bundle.theta, &lossless[i], &recon[i]))
            .collect::<Result<Vec<_>>>()?;
        let (losses, grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        let loss = mean_loss(&losses);
        guard(&loss, cfg, phase, s.next_step())?;
        let grads = mean_triple(grads);
        let mut lr = 0.0;
        for k in 0..3 {
            lr = opts[k].apply(&mut bundle.theta[k], &grads[k]);
        }
        bundle.meta.steps.mdvcn += 1;
        s.record(phase, iteration, epoch, lr, loss);
        Ok(())
    })?;
    let end = eval_mdvcn(&bundle.theta, lossless, recon)?;
    s.summarize(phase, iteration, steps, start, end);
    Ok(())
}

/// Trains the generator through the frozen virtual codec.
fn mdgn_phase(
    s: &mut Session,
    bundle: &mut ModelBundle,
    opt: &mut Optimizer,
    targets: &[Plane],
    beta: f64,
    iteration: usize,
    cfg: &TrainingConfig,
) -> Result<()> {
    let start = eval_generator(bundle, targets, beta, &cfg.loss)?;
    let steps = s.run_epochs(cfg.epochs_q, |s, batch, epoch| {
        let parts = batch
            .par_iter()
            .map(|&i| generator_gradient(bundle, &targets[i], beta, &cfg.loss, ReconstructionPath::Virtual))
            .collect::<Result<Vec<_>>>()?;
        let (losses, grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        let loss = mean_loss(&losses);
        guard(&loss, cfg, "mdgn", s.next_step())?;
        let lr = opt.apply(&mut bundle.omega, &mean_grads(grads));
        bundle.meta.steps.mdgn += 1;
        s.record("mdgn", iteration, epoch, lr, loss);
        Ok(())
    })?;
    let end = eval_generator(bundle, targets, beta, &cfg.loss)?;
    s.summarize("mdgn", iteration, steps, start, end);
    Ok(())
}

pub fn train_algorithm1(patches: &[ImageTensor], cfg: &TrainingConfig) -> Result<Trained> {
    cfg.validate()?;
    train_algorithm1_from(init_params_with_width(cfg.seed, cfg.width), patches, cfg)
}

/// Alternating training starting from an existing bundle.
pub fn train_algorithm1_from(
    mut bundle: ModelBundle,
    patches: &[ImageTensor],
    cfg: &TrainingConfig,
) -> Result<Trained> {
    cfg.validate()?;
    cfg.check_dataset(patches.len())?;
    bundle.validate()?;
    bundle.meta.qf = Some(cfg.qf);
    bundle.meta.seed = cfg.seed;
    bundle.meta.algorithm = Some(1);
    let mut session = Session::new(cfg, patches.len());
    match run(&mut bundle, &mut session, patches, cfg) {
        Ok(()) => Ok(Trained {
            bundle,
            log: session.log,
        }),
        Err(e) => Err(on_divergence(e, &bundle, cfg)),
    }
}

fn run(bundle: &mut ModelBundle, s: &mut Session, patches: &[ImageTensor], cfg: &TrainingConfig) -> Result<()> {
    let codec = CodecConfig::new(cfg.qf)?;
    let beta = cfg.beta()?;
    let targets = planes(patches);
    let nb = s.batches_per_epoch();
    let r = cfg.iterations;
    let mut alpha_opts = optimizers(&bundle.alpha, cfg, (r + 1) * cfg.epochs_p * nb);
    let mut theta_opts = optimizers(&bundle.theta, cfg, r * cfg.epochs_p * nb);
    let mut omega_opt = Optimizer::new(&bundle.omega, cfg.adam(), cfg.lr0, r * cfg.epochs_q * nb);

    let mut descriptions = polyphase_pairs(patches)?;
    for it in 0..r {
        let decoded = compress_all(&descriptions, &codec)?;
        mdrn_phase(
            s,
            bundle,
            &mut alpha_opts,
            &targets,
            &decoded,
            cfg.epochs_p,
            "mdrn",
            it,
            cfg,
        )?;

        let recon = reconstruct_all(&bundle.alpha, &decoded)?;
        mdvcn_phase(
            s,
            bundle,
            &mut theta_opts,
            &descriptions,
            &recon,
            cfg.epochs_p,
            "mdvcn",
            it,
            cfg,
        )?;

        mdgn_phase(s, bundle, &mut omega_opt, &targets, beta, it, cfg)?;

        descriptions = generate_descriptions(&bundle.omega, &targets)?;
    }
    let decoded = compress_all(&descriptions, &codec)?;
    mdrn_phase(
        s,
        bundle,
        &mut alpha_opts,
        &targets,
        &decoded,
        cfg.epochs_p,
        "mdrn_final",
        r,
        cfg,
    )
}

/// Trains only the generator on the description objective (no
/// reconstruction term) for `epochs_q` epochs per iteration.
pub fn train_descriptions(patches: &[ImageTensor], cfg: &TrainingConfig) -> Result<Trained> {
    cfg.validate()?;
    cfg.check_dataset(patches.len())?;
    let mut bundle = init_params_with_width(cfg.seed, cfg.width);
    bundle.meta.qf = Some(cfg.qf);
    let mut s = Session::new(cfg, patches.len());
    let targets = planes(patches);
    let beta = cfg.beta()?;
    let total = cfg.iterations * cfg.epochs_q * s.batches_per_epoch();
    let mut opt = Optimizer::new(&bundle.omega, cfg.adam(), cfg.lr0, total);
    let result = s.run_epochs(cfg.iterations * cfg.epochs_q, |s, batch, epoch| {
        let parts = batch
            .par_iter()
            .map(|&i| description_gradient(&bundle.omega, &targets[i], beta, &cfg.loss))
            .collect::<Result<Vec<_>>>()?;
        let (losses, grads): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        let loss = mean_loss(&losses);
        guard(&loss, cfg, "descriptions", s.next_step())?;
        let lr = opt.apply(&mut bundle.omega, &mean_grads(grads));
        bundle.meta.steps.mdgn += 1;
        s.record("descriptions", 0, epoch, lr, loss);
        Ok(())
    });
    match result {
        Ok(_) => Ok(Trained { bundle, log: s.log }),
        Err(e) => Err(on_divergence(e, &bundle, cfg)),
    }
}
