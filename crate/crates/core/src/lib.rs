//! Multiple-description image coding with learned description generation.
//!
//! A generator network splits an image into two half-resolution descriptions
//! that are coded independently with JPEG. Either description alone yields a
//! side reconstruction; both together yield a better central reconstruction.
//! A virtual-codec network, trained to mimic codec plus reconstruction,
//! carries gradients from the reconstruction losses back into the generator.

pub mod codec;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod losses;
pub mod networks;
pub mod synth;
pub mod training;

pub use codec::{bits_per_pixel, decode, encode, Bitstream, CodecConfig};
pub use error::{Error, Result};
pub use imaging::{DescriptionPair, ImageTensor, Plane, SsimConfig};
pub use losses::{LossConfig, LossValue};
pub use networks::{ModelBundle, NetworkParams, Role};
pub use training::{Trained, TrainingConfig};
