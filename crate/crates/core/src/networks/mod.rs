//! The generator, reconstruction and virtual-codec networks.

mod arch;
mod checkpoint;
mod conv;
mod model;
mod tensor;

pub use arch::{generator_specs, reconstruction_specs, NetworkParams, Role, DEFAULT_WIDTH};
pub use checkpoint::{load_checkpoint, parameter_digest, save_checkpoint, CHECKPOINT_VERSION};
pub use conv::{layer_backward, layer_forward, Activation, ConvLayer, ConvSpec, LayerKind, Trace};
pub use model::{
    crn_forward, generator_backward, generator_forward, generator_infer, init_network, init_params,
    init_params_with_width, mdgn_forward, mdvcn_forward_central, mdvcn_forward_side, reconstruction_backward,
    reconstruction_forward, reconstruction_infer, srn_forward, BundleMeta, GeneratorTrace, ModelBundle, StepCounts,
    DECONV_ALIGNMENT,
};
pub use tensor::Tensor;
