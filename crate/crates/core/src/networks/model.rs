use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{DescriptionPair, ImageTensor, Plane};
use crate::networks::arch::{NetworkParams, Role, BRANCH_A, BRANCH_B, DEFAULT_WIDTH, FEN};
use crate::networks::conv::{chain_backward, chain_forward, chain_infer, Activation, ConvLayer, Trace};
use crate::networks::tensor::Tensor;

/// Spatial alignment of the stride-2 deconvolution, stored with checkpoints.
pub const DECONV_ALIGNMENT: &str = "k9s2-pad4-outpad1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub mdgn: u64,
    pub mdrn: u64,
    pub mdvcn: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    /// Quality factor the bundle was trained for.
    pub qf: Option<u32>,
    pub seed: u64,
    pub width: usize,
    pub alignment: String,
    pub algorithm: Option<u8>,
    pub steps: StepCounts,
}

/// Every trainable parameter set of the framework.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub omega: NetworkParams,
    pub alpha: [NetworkParams; 3],
    pub theta: [NetworkParams; 3],
    pub meta: BundleMeta,
}

impl ModelBundle {
    pub fn width(&self) -> usize {
        self.meta.width
    }

    pub fn get(&self, role: Role) -> &NetworkParams {
        match role {
            Role::Omega => &self.omega,
            Role::Alpha1 => &self.alpha[0],
            Role::Alpha2 => &self.alpha[1],
            Role::Alpha3 => &self.alpha[2],
            Role::Theta1 => &self.theta[0],
            Role::Theta2 => &self.theta[1],
            Role::Theta3 => &self.theta[2],
        }
    }

    pub fn get_mut(&mut self, role: Role) -> &mut NetworkParams {
        match role {
            Role::Omega => &mut self.omega,
            Role::Alpha1 => &mut self.alpha[0],
            Role::Alpha2 => &mut self.alpha[1],
            Role::Alpha3 => &mut self.alpha[2],
            Role::Theta1 => &mut self.theta[0],
            Role::Theta2 => &mut self.theta[1],
            Role::Theta3 => &mut self.theta[2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for role in Role::ALL {
            let p = self.get(role);
            if p.role != role {
                return Err(Error::Shape(format!("slot {role} holds `{}` parameters", p.role)));
            }
            if p.width != self.meta.width {
                return Err(Error::Shape(format!("{role} width {} != bundle width", p.width)));
            }
            p.validate()?;
        }
        Ok(())
    }
}

/// Variance gain of the linear output layers. Starting them near zero makes
/// untrained networks emit nearly flat images rather than high-frequency
/// noise, which otherwise drives the ReLU stacks dead within Adam's first
/// few steps.
const OUTPUT_GAIN: f64 = 0.01;

/// Fan-in-scaled normal initialization with zero biases.
pub fn init_params(seed: u64) -> ModelBundle {
    init_params_with_width(seed, DEFAULT_WIDTH)
}

pub fn init_params_with_width(seed: u64, width: usize) -> ModelBundle {
    let net = |role| init_network(role, width, seed);
    ModelBundle {
        omega: net(Role::Omega),
        alpha: [net(Role::Alpha1), net(Role::Alpha2), net(Role::Alpha3)],
        theta: [net(Role::Theta1), net(Role::Theta2), net(Role::Theta3)],
        meta: BundleMeta {
            qf: None,
            seed,
            width,
            alignment: DECONV_ALIGNMENT.to_string(),
            algorithm: None,
            steps: StepCounts::default(),
        },
    }
}

pub fn init_network(role: Role, width: usize, seed: u64) -> NetworkParams {
    let mut params = NetworkParams::zeros(role, width);
    for (l, (spec, layer)) in params.specs.iter().zip(params.layers.iter_mut()).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((role.index() as u64) << 16) | l as u64);
        let gain = match spec.activation {
            Activation::Relu => 2.0,
            Activation::None => OUTPUT_GAIN,
        };
        let std = (gain / spec.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        layer.weight.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    }
    params
}

fn ensure_even(p: &Plane) -> Result<()> {
    let (h, w) = p.dims();
    if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
        return Err(Error::Shape(format!(
            "generator input must have even dimensions, got {h}x{w}"
        )));
    }
    Ok(())
}

/// Generator activations: shared extractor plus both branches.
#[derive(Clone, Debug)]
pub struct GeneratorTrace {
    pub shared: Trace,
    pub branch_a: Trace,
    pub branch_b: Trace,
}

impl GeneratorTrace {
    pub fn description_a(&self) -> Plane {
        self.branch_a.output().clone().into_plane()
    }

    pub fn description_b(&self) -> Plane {
        self.branch_b.output().clone().into_plane()
    }
}

/// Training-mode generator pass; outputs are not clamped.
pub fn generator_forward(omega: &NetworkParams, image: &Plane) -> Result<GeneratorTrace> {
    omega.expect_role(&[Role::Omega])?;
    ensure_even(image)?;
    let shared = chain_forward(&omega.specs[FEN], &omega.layers[FEN], Tensor::from_plane(image))?;
    let features = shared.output().clone();
    let branch_a = chain_forward(&omega.specs[BRANCH_A], &omega.layers[BRANCH_A], features.clone())?;
    let branch_b = chain_forward(&omega.specs[BRANCH_B], &omega.layers[BRANCH_B], features)?;
    Ok(GeneratorTrace {
        shared,
        branch_a,
        branch_b,
    })
}

/// Parameter gradients of the generator given gradients on both descriptions.
pub fn generator_backward(
    omega: &NetworkParams,
    trace: &GeneratorTrace,
    grad_a: &Plane,
    grad_b: &Plane,
) -> Result<Vec<ConvLayer>> {
    let (ga_feat, ga) = chain_backward(
        &omega.specs[BRANCH_A],
        &omega.layers[BRANCH_A],
        &trace.branch_a,
        Tensor::from_plane(grad_a),
        true,
    )?;
    let (gb_feat, gb) = chain_backward(
        &omega.specs[BRANCH_B],
        &omega.layers[BRANCH_B],
        &trace.branch_b,
        Tensor::from_plane(grad_b),
        true,
    )?;
    let mut feat = ga_feat.expect("requested");
    feat.add_assign(&gb_feat.expect("requested"));
    let (_, gf) = chain_backward(&omega.specs[FEN], &omega.layers[FEN], &trace.shared, feat, false)?;
    let mut grads = gf;
    grads.extend(ga);
    grads.extend(gb);
    Ok(grads)
}

fn reconstruction_input(params: &NetworkParams, inputs: &[&Plane]) -> Result<Tensor> {
    if inputs.len() != params.role.input_channels() {
        return Err(Error::Shape(format!(
            "{} takes {} input description(s), got {}",
            params.role,
            params.role.input_channels(),
            inputs.len()
        )));
    }
    Tensor::stack(inputs)
}

/// Training-mode reconstruction pass (side networks take one plane, central two).
pub fn reconstruction_forward(params: &NetworkParams, inputs: &[&Plane]) -> Result<Trace> {
    if params.role == Role::Omega {
        return Err(Error::Config(
            "generator parameters passed to a reconstruction network".into(),
        ));
    }
    chain_forward(&params.specs, &params.layers, reconstruction_input(params, inputs)?)
}

/// Back-propagation through a reconstruction network. The input gradient has
/// one channel per input description.
pub fn reconstruction_backward(
    params: &NetworkParams,
    trace: &Trace,
    grad_out: &Plane,
    need_input_grad: bool,
) -> Result<(Option<Tensor>, Vec<ConvLayer>)> {
    chain_backward(
        &params.specs,
        &params.layers,
        trace,
        Tensor::from_plane(grad_out),
        need_input_grad,
    )
}

/// Unclamped reconstruction output without keeping activations.
pub fn reconstruction_infer(params: &NetworkParams, inputs: &[&Plane]) -> Result<Plane> {
    if params.role == Role::Omega {
        return Err(Error::Config(
            "generator parameters passed to a reconstruction network".into(),
        ));
    }
    Ok(chain_infer(&params.specs, &params.layers, reconstruction_input(params, inputs)?)?.into_plane())
}

/// Unclamped generator outputs without keeping activations.
pub fn generator_infer(omega: &NetworkParams, image: &Plane) -> Result<(Plane, Plane)> {
    omega.expect_role(&[Role::Omega])?;
    ensure_even(image)?;
    let feat = chain_infer(&omega.specs[FEN], &omega.layers[FEN], Tensor::from_plane(image))?;
    let a = chain_infer(&omega.specs[BRANCH_A], &omega.layers[BRANCH_A], feat.clone())?;
    let b = chain_infer(&omega.specs[BRANCH_B], &omega.layers[BRANCH_B], feat)?;
    Ok((a.into_plane(), b.into_plane()))
}

/// Generates the two half-resolution descriptions, clamped to `[0, 1]`.
pub fn mdgn_forward(image: &ImageTensor, omega: &NetworkParams) -> Result<DescriptionPair> {
    let (a, b) = generator_infer(omega, image)?;
    DescriptionPair::new(a.clamped(), b.clamped())
}

/// Side reconstruction of a decoded description.
pub fn srn_forward(description: &ImageTensor, params: &NetworkParams) -> Result<ImageTensor> {
    params.expect_role(&[Role::Alpha1, Role::Alpha2])?;
    Ok(reconstruction_infer(params, &[description])?.clamped())
}

/// Central reconstruction from both decoded descriptions.
pub fn crn_forward(a: &ImageTensor, b: &ImageTensor, params: &NetworkParams) -> Result<ImageTensor> {
    params.expect_role(&[Role::Alpha3])?;
    a.ensure_same_dims(b, "central reconstruction inputs")?;
    Ok(reconstruction_infer(params, &[a, b])?.clamped())
}

/// Virtual side reconstruction of a lossless description.
pub fn mdvcn_forward_side(description: &ImageTensor, params: &NetworkParams) -> Result<ImageTensor> {
    params.expect_role(&[Role::Theta1, Role::Theta2])?;
    Ok(reconstruction_infer(params, &[description])?.clamped())
}

/// Virtual central reconstruction from both lossless descriptions.
pub fn mdvcn_forward_central(a: &ImageTensor, b: &ImageTensor, params: &NetworkParams) -> Result<ImageTensor> {
    params.expect_role(&[Role::Theta3])?;
    a.ensure_same_dims(b, "virtual central inputs")?;
    Ok(reconstruction_infer(params, &[a, b])?.clamped())
}
