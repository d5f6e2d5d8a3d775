//! Shared bookkeeping of a training run: batching, logging, divergence handling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::LossValue;
use crate::networks::{save_checkpoint, ModelBundle};
use crate::training::log::{PhaseSummary, StepRecord, TrainLog};
use crate::training::TrainingConfig;

pub(crate) struct Session {
    pub log: TrainLog,
    rng: ChaCha8Rng,
    n: usize,
    batch: usize,
}

impl Session {
    pub fn new(cfg: &TrainingConfig, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0xba7c);
        Session {
            log: TrainLog::default(),
            rng,
            n,
            batch: cfg.batch,
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n / self.batch
    }

    /// One epoch of shuffled mini-batches; the remainder is dropped.
    pub fn epoch_batches(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(&mut self.rng);
        order.chunks_exact(self.batch).map(|c| c.to_vec()).collect()
    }

    pub fn next_step(&self) -> usize {
        self.log.next_step()
    }

    pub fn record(&mut self, phase: &str, iteration: usize, epoch: usize, lr: f64, loss: LossValue) {
        let step = self.log.next_step();
        self.log.records.push(StepRecord {
            step,
            phase: phase.to_string(),
            iteration,
            epoch,
            lr,
            loss,
        });
    }

    /// Runs `epochs` shuffled epochs, calling `step(batch, global_step, epoch)`
    /// once per mini-batch. Returns the number of batches processed.
    pub fn run_epochs(
        &mut self,
        epochs: usize,
        mut step: impl FnMut(&mut Session, &[usize], usize) -> Result<()>,
    ) -> Result<usize> {
        let mut count = 0;
        for epoch in 0..epochs {
            for batch in self.epoch_batches() {
                step(self, &batch, epoch)?;
                count += 1;
            }
        }
        Ok(count)
    }

    pub fn summarize(&mut self, phase: &str, iteration: usize, steps: usize, start_loss: f64, end_loss: f64) {
        log::info!("{phase} (iteration {iteration}): {steps} steps, loss {start_loss:.6} -> {end_loss:.6}");
        self.log.phases.push(PhaseSummary {
            phase: phase.to_string(),
            iteration,
            steps,
            start_loss,
            end_loss,
        });
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.log.warnings.push(message);
    }
}

/// Aborts when a loss is non-finite or beyond the configured ceiling.
pub(crate) fn guard(loss: &LossValue, cfg: &TrainingConfig, phase: &str, step: usize) -> Result<()> {
    let total = loss.total();
    if !total.is_finite() || total.abs() > cfg.divergence_ceiling {
        return Err(Error::Diverged {
            phase: phase.to_string(),
            step,
            loss: total,
            checkpoint: None,
        });
    }
    Ok(())
}

/// Attaches a diagnostic checkpoint of `bundle` to a divergence error.
pub(crate) fn on_divergence(err: Error, bundle: &ModelBundle, cfg: &TrainingConfig) -> Error {
    match (err, &cfg.diagnostic_dir) {
        (
            Error::Diverged {
                phase,
                step,
                loss,
                checkpoint: None,
            },
            Some(dir),
        ) => {
            let path = dir.join(format!("diverged_{phase}_step{step}.ckpt"));
            let written = std::fs::create_dir_all(dir)
                .map_err(|e| Error::io(dir, e))
                .and_then(|_| save_checkpoint(bundle, &path));
            let checkpoint = match written {
                Ok(()) => Some(path),
                Err(e) => {
                    log::error!("could not write diagnostic checkpoint: {e}");
                    None
                }
            };
            Error::Diverged {
                phase,
                step,
                loss,
                checkpoint,
            }
        }
        (err, _) => err,
    }
}
