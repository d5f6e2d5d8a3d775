//! Two-channel erasure simulation with side/central decoder selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::evaluation::rd::{reconstruct_all_views, LearnedDescriptions, LearnedReconstruction};
use crate::imaging::{psnr, ssim, ImageTensor, SsimConfig};
use crate::networks::ModelBundle;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelScenario {
    pub p_loss_a: f64,
    pub p_loss_b: f64,
    pub trials: u64,
    pub seed: u64,
}

impl ChannelScenario {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_loss_a", self.p_loss_a), ("p_loss_b", self.p_loss_b)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Range(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// What the receiver ends up with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    Both,
    OnlyA,
    OnlyB,
    Neither,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Both, Outcome::OnlyA, Outcome::OnlyB, Outcome::Neither];

    pub fn from_arrivals(a: bool, b: bool) -> Outcome {
        match (a, b) {
            (true, true) => Outcome::Both,
            (true, false) => Outcome::OnlyA,
            (false, true) => Outcome::OnlyB,
            (false, false) => Outcome::Neither,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// The decoder that handles this outcome, if any.
    pub fn decoder(self) -> Option<Decoder> {
        match self {
            Outcome::Both => Some(Decoder::Central),
            Outcome::OnlyA => Some(Decoder::SideA),
            Outcome::OnlyB => Some(Decoder::SideB),
            Outcome::Neither => None,
        }
    }

    /// Probability of the outcome under independent losses.
    pub fn probability(self, p_loss_a: f64, p_loss_b: f64) -> f64 {
        let (ra, rb) = (1.0 - p_loss_a, 1.0 - p_loss_b);
        match self {
            Outcome::Both => ra * rb,
            Outcome::OnlyA => ra * p_loss_b,
            Outcome::OnlyB => p_loss_a * rb,
            Outcome::Neither => p_loss_a * p_loss_b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Decoder {
    SideA,
    SideB,
    Central,
}

/// PSNR/SSIM of each decoder's output for one image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecoderQuality {
    pub side_a: (f64, f64),
    pub side_b: (f64, f64),
    pub central: (f64, f64),
}

impl DecoderQuality {
    pub fn of(&self, decoder: Decoder) -> (f64, f64) {
        match decoder {
            Decoder::SideA => self.side_a,
            Decoder::SideB => self.side_b,
            Decoder::Central => self.central,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelReport {
    /// Weight of each outcome in `Outcome::ALL` order: trial counts
    /// normalized by the total, or exact probabilities when enumerated.
    pub outcome_weights: [f64; 4],
    /// Trial counts in `Outcome::ALL` order (empty when enumerated).
    pub counts: Option<[u64; 4]>,
    /// Mean PSNR over the outcomes in which something was delivered,
    /// weighted by outcome frequency; `None` if nothing ever arrived.
    pub expected_psnr: Option<f64>,
    pub expected_ssim: Option<f64>,
    /// Probability (or frequency) that neither description arrived.
    pub outage: f64,
}

/// Probability-weighted quality over delivered outcomes; the mass of
/// "neither" is excluded and reported as outage.
fn weighted(quality: &DecoderQuality, weights: [f64; 4], counts: Option<[u64; 4]>) -> ChannelReport {
    let delivered = [Outcome::Both, Outcome::OnlyA, Outcome::OnlyB];
    // Shares as exact ratios of counts where available, so that a single
    // delivered outcome reproduces its decoder's quality exactly.
    let shares: Vec<f64> = match counts {
        Some(c) => {
            let mass = c[0] + c[1] + c[2];
            delivered.iter().map(|o| c[o.index()] as f64 / mass as f64).collect()
        }
        None => {
            let mass: f64 = delivered.iter().map(|o| weights[o.index()]).sum();
            delivered.iter().map(|o| weights[o.index()] / mass).collect()
        }
    };
    let nothing_delivered = delivered.iter().all(|o| weights[o.index()] <= 0.0);
    let (mut p, mut s) = (0.0, 0.0);
    for (o, share) in delivered.iter().zip(&shares) {
        if *share > 0.0 {
            let (qp, qs) = quality.of(o.decoder().expect("delivered outcome"));
            p += share * qp;
            s += share * qs;
        }
    }
    ChannelReport {
        outcome_weights: weights,
        counts,
        expected_psnr: (!nothing_delivered).then_some(p),
        expected_ssim: (!nothing_delivered).then_some(s),
        outage: weights[Outcome::Neither.index()],
    }
}

/// Monte-Carlo over independent channel losses.
pub fn monte_carlo(quality: &DecoderQuality, scenario: &ChannelScenario) -> Result<ChannelReport> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut counts = [0u64; 4];
    for _ in 0..scenario.trials {
        let lost_a = rng.random::<f64>() < scenario.p_loss_a;
        let lost_b = rng.random::<f64>() < scenario.p_loss_b;
        counts[Outcome::from_arrivals(!lost_a, !lost_b).index()] += 1;
    }
    let total = scenario.trials as f64;
    let weights = counts.map(|c| c as f64 / total);
    Ok(weighted(quality, weights, Some(counts)))
}

/// Exact expectation by enumerating the four outcomes.
pub fn enumerate_outcomes(quality: &DecoderQuality, p_loss_a: f64, p_loss_b: f64) -> Result<ChannelReport> {
    ChannelScenario {
        p_loss_a,
        p_loss_b,
        trials: 1,
        seed: 0,
    }
    .validate()?;
    let weights = Outcome::ALL.map(|o| o.probability(p_loss_a, p_loss_b));
    Ok(weighted(quality, weights, None))
}

/// Quality of each decoder for one image through the learned pipeline.
pub fn decoder_quality(
    bundle: &ModelBundle,
    image: &ImageTensor,
    qf: u32,
    ssim_cfg: &SsimConfig,
) -> Result<DecoderQuality> {
    let codec = CodecConfig::new(qf)?;
    let (_, [ra, rb, rc]) = reconstruct_all_views(
        &LearnedDescriptions(&bundle.omega),
        &LearnedReconstruction(&bundle.alpha),
        image,
        &codec,
    )?;
    let q = |r: &ImageTensor| -> Result<(f64, f64)> { Ok((psnr(image, r)?, ssim(image, r, ssim_cfg)?)) };
    Ok(DecoderQuality {
        side_a: q(&ra)?,
        side_b: q(&rb)?,
        central: q(&rc)?,
    })
}

/// Expected reconstruction quality of one image over two lossy channels.
pub fn simulate_channels(
    bundle: &ModelBundle,
    image: &ImageTensor,
    qf: u32,
    scenario: &ChannelScenario,
) -> Result<ChannelReport> {
    scenario.validate()?;
    let quality = decoder_quality(bundle, image, qf, &SsimConfig::default())?;
    monte_carlo(&quality, scenario)
}
