//! Rasters, poly-phase descriptions, resampling and quality metrics.

mod io;
mod metrics;
mod patches;
mod plane;
mod polyphase;
mod resample;
mod ssim;

pub use io::{load_corpus, load_image, save_image};
pub use metrics::psnr;
pub use patches::{prepare_patches, Augmentation, Augmentations, Patch, PatchConfig, PatchSet, MANIFEST_FILE};
pub use plane::{DescriptionPair, ImageTensor, Plane};
pub use polyphase::{polyphase_embed, polyphase_split, PhaseMask};
pub use resample::{upsample2x, upsample2x_adjoint, upsample_linear};
pub use ssim::{ssim, SsimConfig};

pub(crate) use ssim::ssim_with_grad;
