//! The two learning procedures, their optimizer schedule and logging.

mod adam;
mod alg1;
mod alg2;
mod log;
mod schedule;
mod session;
mod steps;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{beta_for_qf, LossConfig};
use crate::networks::{ModelBundle, DEFAULT_WIDTH};

pub use adam::{AdamConfig, Optimizer};
pub use alg1::{train_algorithm1, train_algorithm1_from, train_descriptions};
pub use alg2::{train_algorithm2, train_algorithm2_from};
pub use log::{PhaseSummary, StepRecord, TrainLog};
pub use schedule::lr_at_step;
pub use steps::{
    compress_all, compress_pair, description_gradient, eval_generator, eval_mdrn, eval_mdvcn, generate_descriptions,
    generator_gradient, joint_gradients, mdrn_gradient, mdvcn_gradient, reconstruct, reconstruct_all, Grads,
    JointGradients, Pair, ReconstructionPath,
};

/// Hyper-parameters of both training procedures.
///
/// `iterations` and `epochs_p`/`epochs_q` drive the alternating procedure;
/// `joint_iterations`/`epochs_l` drive the joint one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub iterations: usize,
    pub epochs_p: usize,
    pub epochs_q: usize,
    pub joint_iterations: usize,
    pub epochs_l: usize,
    /// Epochs of reconstruction warm-up and virtual-codec pre-training
    /// before joint training.
    pub pretrain_epochs: usize,
    pub batch: usize,
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub qf: u32,
    pub seed: u64,
    pub width: usize,
    /// Overrides the quality-dependent distance weight.
    pub distance_weight: Option<f64>,
    /// Losses above this magnitude count as divergence.
    pub divergence_ceiling: f64,
    /// Mimicry loss above which the virtual codec is flagged as unreliable.
    pub mimicry_warning: f64,
    /// Where a diagnostic checkpoint is written when training diverges.
    pub diagnostic_dir: Option<PathBuf>,
    pub loss: LossConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            iterations: 3,
            epochs_p: 2,
            epochs_q: 2,
            joint_iterations: 1,
            epochs_l: 4,
            pretrain_epochs: 2,
            batch: 16,
            lr0: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            qf: 10,
            seed: 0,
            width: DEFAULT_WIDTH,
            distance_weight: None,
            divergence_ceiling: 1e4,
            mimicry_warning: 0.5,
            diagnostic_dir: None,
            loss: LossConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("iterations", self.iterations),
            ("epochs_p", self.epochs_p),
            ("epochs_q", self.epochs_q),
            ("joint_iterations", self.joint_iterations),
            ("epochs_l", self.epochs_l),
            ("pretrain_epochs", self.pretrain_epochs),
            ("batch", self.batch),
            ("width", self.width),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(1..=100).contains(&self.qf) {
            return Err(Error::Config(format!("qf must lie in 1..=100, got {}", self.qf)));
        }
        if let Some(w) = self.distance_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("distance_weight must be non-negative, got {w}")));
            }
        }
        if self.divergence_ceiling.is_nan() || self.divergence_ceiling <= 0.0 {
            return Err(Error::Config("divergence_ceiling must be positive".into()));
        }
        self.loss.validate()
    }

    /// Weight of the description distance term actually used.
    pub fn beta(&self) -> Result<f64> {
        match self.distance_weight {
            Some(w) => Ok(w),
            None => beta_for_qf(self.qf, &self.loss),
        }
    }

    pub(crate) fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub(crate) fn check_dataset(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Config("training set is empty".into()));
        }
        if self.batch > n {
            return Err(Error::Config(format!(
                "batch {} exceeds training set size {n}",
                self.batch
            )));
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct Trained {
    pub bundle: ModelBundle,
    pub log: TrainLog,
}
