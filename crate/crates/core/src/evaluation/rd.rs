//! Rate-distortion evaluation of description/reconstruction pipelines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{bits_per_pixel, decode, encode, Bitstream, CodecConfig};
use crate::error::{Error, Result};
use crate::imaging::{polyphase_split, psnr, ssim, upsample2x, DescriptionPair, ImageTensor, SsimConfig};
use crate::networks::{crn_forward, mdgn_forward, srn_forward, ModelBundle, NetworkParams};

/// Quality factors for the learned pipeline.
pub const PROPOSED_QFS: [u32; 5] = [2, 6, 10, 20, 40];
/// Quality factors for the poly-phase baseline.
pub const BASELINE_QFS: [u32; 5] = [2, 3, 4, 10, 50];

/// One rate-distortion measurement; side figures are means over A and B.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub qf: u32,
    pub bpp_side: f64,
    pub bpp_central: f64,
    pub psnr_side: f64,
    pub ssim_side: f64,
    pub psnr_central: f64,
    pub ssim_central: f64,
}

impl RdPoint {
    /// `"28.577/0.803/0.292(s) and 31.410/0.842/0.585(c)"`.
    pub fn caption(&self) -> String {
        format!(
            "{:.3}/{:.3}/{:.3}(s) and {:.3}/{:.3}/{:.3}(c)",
            self.psnr_side, self.ssim_side, self.bpp_side, self.psnr_central, self.ssim_central, self.bpp_central
        )
    }
}

/// Per-description detail behind an [`RdPoint`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImageEvaluation {
    pub qf: u32,
    pub bpp_a: f64,
    pub bpp_b: f64,
    pub psnr_a: f64,
    pub psnr_b: f64,
    pub ssim_a: f64,
    pub ssim_b: f64,
    pub psnr_central: f64,
    pub ssim_central: f64,
}

impl ImageEvaluation {
    pub fn point(&self) -> RdPoint {
        RdPoint {
            qf: self.qf,
            bpp_side: (self.bpp_a + self.bpp_b) / 2.0,
            bpp_central: self.bpp_a + self.bpp_b,
            psnr_side: (self.psnr_a + self.psnr_b) / 2.0,
            ssim_side: (self.ssim_a + self.ssim_b) / 2.0,
            psnr_central: self.psnr_central,
            ssim_central: self.ssim_central,
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdRow {
    pub method: String,
    pub image: String,
    #[serde(flatten)]
    pub point: RdPoint,
}

/// Label used for corpus-mean rows.
pub const MEAN_IMAGE: &str = "mean";

#[derive(Clone, Debug)]
pub struct RdReport {
    pub method: String,
    /// Per image (input order), per quality factor (input order).
    pub images: Vec<(String, Vec<ImageEvaluation>)>,
    /// Corpus mean per quality factor.
    pub means: Vec<RdPoint>,
}

impl RdReport {
    /// Per-image rows followed by the mean rows.
    pub fn rows(&self) -> Vec<RdRow> {
        let mut rows: Vec<RdRow> = self
            .images
            .iter()
            .flat_map(|(name, evals)| {
                evals.iter().map(move |e| RdRow {
                    method: self.method.clone(),
                    image: name.clone(),
                    point: e.point(),
                })
            })
            .collect();
        rows.extend(self.means.iter().map(|p| RdRow {
            method: self.method.clone(),
            image: MEAN_IMAGE.to_string(),
            point: *p,
        }));
        rows
    }

    pub fn mean_rows(&self) -> Vec<RdRow> {
        self.rows().into_iter().filter(|r| r.image == MEAN_IMAGE).collect()
    }
}

/// Produces two descriptions from a source image.
pub trait Describer: Sync {
    fn describe(&self, image: &ImageTensor) -> Result<DescriptionPair>;
}

/// Rebuilds the full-resolution image from decoded descriptions.
pub trait Reconstructor: Sync {
    fn side_a(&self, a: &ImageTensor) -> Result<ImageTensor>;
    fn side_b(&self, b: &ImageTensor) -> Result<ImageTensor>;
    fn central(&self, a: &ImageTensor, b: &ImageTensor) -> Result<ImageTensor>;
}

/// The learned generator.
pub struct LearnedDescriptions<'a>(pub &'a NetworkParams);

impl Describer for LearnedDescriptions<'_> {
    fn describe(&self, image: &ImageTensor) -> Result<DescriptionPair> {
        mdgn_forward(image, self.0)
    }
}

/// Fixed diagonal poly-phase down-sampling.
pub struct Polyphase;

impl Describer for Polyphase {
    fn describe(&self, image: &ImageTensor) -> Result<DescriptionPair> {
        polyphase_split(image)
    }
}

/// The learned side and central reconstruction networks.
pub struct LearnedReconstruction<'a>(pub &'a [NetworkParams; 3]);

impl Reconstructor for LearnedReconstruction<'_> {
    fn side_a(&self, a: &ImageTensor) -> Result<ImageTensor> {
        srn_forward(a, &self.0[0])
    }
    fn side_b(&self, b: &ImageTensor) -> Result<ImageTensor> {
        srn_forward(b, &self.0[1])
    }
    fn central(&self, a: &ImageTensor, b: &ImageTensor) -> Result<ImageTensor> {
        crn_forward(a, b, &self.0[2])
    }
}

/// Bilinear up-sampling; the central image averages both up-sampled sides.
pub struct Bilinear;

impl Reconstructor for Bilinear {
    fn side_a(&self, a: &ImageTensor) -> Result<ImageTensor> {
        Ok(upsample2x(a).clamped())
    }
    fn side_b(&self, b: &ImageTensor) -> Result<ImageTensor> {
        Ok(upsample2x(b).clamped())
    }
    fn central(&self, a: &ImageTensor, b: &ImageTensor) -> Result<ImageTensor> {
        let (ua, ub) = (upsample2x(a), upsample2x(b));
        let data = ua.data().iter().zip(ub.data()).map(|(x, y)| 0.5 * (x + y)).collect();
        ImageTensor::from_vec(ua.height(), ua.width(), data)
    }
}

/// Both descriptions encoded and decoded at one quality factor.
#[derive(Clone, Debug)]
pub struct CodedPair {
    pub streams: [Bitstream; 2],
    pub decoded: DescriptionPair,
}

pub fn code_descriptions(pair: &DescriptionPair, codec: &CodecConfig) -> Result<CodedPair> {
    let sa = encode(&pair.a, codec)?;
    let sb = encode(&pair.b, codec)?;
    let decoded = DescriptionPair::new(decode(&sa)?, decode(&sb)?)?;
    Ok(CodedPair {
        streams: [sa, sb],
        decoded,
    })
}

/// Side A, side B and central reconstructions of one image at one quality.
pub fn reconstruct_all_views(
    describer: &dyn Describer,
    reconstructor: &dyn Reconstructor,
    image: &ImageTensor,
    codec: &CodecConfig,
) -> Result<(CodedPair, [ImageTensor; 3])> {
    let pair = describer.describe(image)?;
    let coded = code_descriptions(&pair, codec)?;
    let d = &coded.decoded;
    let views = [
        reconstructor.side_a(&d.a)?,
        reconstructor.side_b(&d.b)?,
        reconstructor.central(&d.a, &d.b)?,
    ];
    Ok((coded, views))
}

fn evaluate_image(
    describer: &dyn Describer,
    reconstructor: &dyn Reconstructor,
    image: &ImageTensor,
    codec: &CodecConfig,
    ssim_cfg: &SsimConfig,
) -> Result<ImageEvaluation> {
    let (h, w) = image.dims();
    let (coded, [ra, rb, rc]) = reconstruct_all_views(describer, reconstructor, image, codec)?;
    Ok(ImageEvaluation {
        qf: codec.qf(),
        bpp_a: bits_per_pixel(&[&coded.streams[0]], h, w)?,
        bpp_b: bits_per_pixel(&[&coded.streams[1]], h, w)?,
        psnr_a: psnr(image, &ra)?,
        psnr_b: psnr(image, &rb)?,
        ssim_a: ssim(image, &ra, ssim_cfg)?,
        ssim_b: ssim(image, &rb, ssim_cfg)?,
        psnr_central: psnr(image, &rc)?,
        ssim_central: ssim(image, &rc, ssim_cfg)?,
    })
}

/// Evaluates any description/reconstruction pair over a corpus and QF grid.
pub fn evaluate_pipeline(
    method: &str,
    describer: &dyn Describer,
    reconstructor: &dyn Reconstructor,
    images: &[(String, ImageTensor)],
    qfs: &[u32],
    ssim_cfg: &SsimConfig,
) -> Result<RdReport> {
    if images.is_empty() {
        return Err(Error::Config("evaluation corpus is empty".into()));
    }
    if qfs.is_empty() {
        return Err(Error::Config("no quality factors given".into()));
    }
    let codecs = qfs.iter().map(|&q| CodecConfig::new(q)).collect::<Result<Vec<_>>>()?;
    ssim_cfg.validate()?;
    let per_image = images
        .par_iter()
        .map(|(name, img)| {
            let evals = codecs
                .iter()
                .map(|c| evaluate_image(describer, reconstructor, img, c, ssim_cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok((name.clone(), evals))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_image.len() as f64;
    let means = qfs
        .iter()
        .enumerate()
        .map(|(k, &qf)| {
            let mean = |f: fn(&RdPoint) -> f64| per_image.iter().map(|(_, e)| f(&e[k].point())).sum::<f64>() / n;
            RdPoint {
                qf,
                bpp_side: mean(|p| p.bpp_side),
                bpp_central: mean(|p| p.bpp_central),
                psnr_side: mean(|p| p.psnr_side),
                ssim_side: mean(|p| p.ssim_side),
                psnr_central: mean(|p| p.psnr_central),
                ssim_central: mean(|p| p.ssim_central),
            }
        })
        .collect();
    Ok(RdReport {
        method: method.to_string(),
        images: per_image,
        means,
    })
}

/// The full learned pipeline: generator, JPEG, reconstruction networks.
pub fn evaluate_model(bundle: &ModelBundle, images: &[(String, ImageTensor)], qfs: &[u32]) -> Result<RdReport> {
    bundle.validate()?;
    evaluate_pipeline(
        "ours",
        &LearnedDescriptions(&bundle.omega),
        &LearnedReconstruction(&bundle.alpha),
        images,
        qfs,
        &SsimConfig::default(),
    )
}

/// Poly-phase descriptions with the learned reconstruction networks.
pub fn evaluate_ours_base(bundle: &ModelBundle, images: &[(String, ImageTensor)], qfs: &[u32]) -> Result<RdReport> {
    bundle.validate()?;
    evaluate_pipeline(
        "ours-base",
        &Polyphase,
        &LearnedReconstruction(&bundle.alpha),
        images,
        qfs,
        &SsimConfig::default(),
    )
}
