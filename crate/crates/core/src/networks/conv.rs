//! Convolution and transposed convolution with "same"-style zero padding,
//! implemented with im2col and GEMM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::networks::tensor::{gemm, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Deconv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kind: LayerKind,
    pub activation: Activation,
}

impl ConvSpec {
    pub fn conv(kernel: usize, stride: usize, c_in: usize, c_out: usize, activation: Activation) -> Self {
        ConvSpec {
            kernel,
            stride,
            c_in,
            c_out,
            kind: LayerKind::Conv,
            activation,
        }
    }

    pub fn deconv(kernel: usize, stride: usize, c_in: usize, c_out: usize, activation: Activation) -> Self {
        ConvSpec {
            kernel,
            stride,
            c_in,
            c_out,
            kind: LayerKind::Deconv,
            activation,
        }
    }

    /// Zero padding on each side; `(k - 1) / 2` for every layer.
    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn weight_len(&self) -> usize {
        self.c_in * self.c_out * self.kernel * self.kernel
    }

    /// Weight tensor shape: `[c_out, c_in, k, k]` for conv, `[c_in, c_out, k, k]` for deconv.
    pub fn weight_shape(&self) -> [usize; 4] {
        let k = self.kernel;
        match self.kind {
            LayerKind::Conv => [self.c_out, self.c_in, k, k],
            LayerKind::Deconv => [self.c_in, self.c_out, k, k],
        }
    }

    /// Inputs to one output unit, used to scale initialization.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.c_in * self.kernel * self.kernel,
            LayerKind::Deconv => (self.c_in * self.kernel * self.kernel / (self.stride * self.stride)).max(1),
        }
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        match self.kind {
            LayerKind::Conv => {
                if self.stride > 1 && (!height.is_multiple_of(self.stride) || !width.is_multiple_of(self.stride)) {
                    return Err(Error::Shape(format!(
                        "stride-{} layer needs dimensions divisible by {}, got {height}x{width}",
                        self.stride, self.stride
                    )));
                }
                Ok((height / self.stride, width / self.stride))
            }
            LayerKind::Deconv => Ok((height * self.stride, width * self.stride)),
        }
    }

    fn geometry(&self, in_h: usize, in_w: usize) -> Result<Geometry> {
        let (out_h, out_w) = self.output_dims(in_h, in_w)?;
        let (big, small) = match self.kind {
            LayerKind::Conv => ((in_h, in_w), (out_h, out_w)),
            LayerKind::Deconv => ((out_h, out_w), (in_h, in_w)),
        };
        Ok(Geometry {
            kernel: self.kernel,
            stride: self.stride,
            pad: self.padding(),
            big,
            small,
        })
    }
}

/// Index map shared by both layer kinds: small-grid position `(i, j)` with
/// tap `(ky, kx)` touches big-grid position `(s*i - pad + ky, s*j - pad + kx)`.
/// For a deconv with k=9, s=2 this is padding 4 with one row/column of
/// output padding, giving exactly twice the input size.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    kernel: usize,
    stride: usize,
    pad: usize,
    big: (usize, usize),
    small: (usize, usize),
}

impl Geometry {
    /// `(c*k*k) x (small_h*small_w)` patch matrix of a big-grid tensor.
    fn im2col(&self, channels: usize, big: &[f64]) -> Vec<f64> {
        let k = self.kernel;
        let (bh, bw) = self.big;
        let (sh, sw) = self.small;
        let cols = sh * sw;
        let mut out = vec![0.0; channels * k * k * cols];
        for c in 0..channels {
            let plane = &big[c * bh * bw..(c + 1) * bh * bw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut out[((c * k + ky) * k + kx) * cols..][..cols];
                    for i in 0..sh {
                        let y = (i * self.stride + ky) as isize - self.pad as isize;
                        if y < 0 || y >= bh as isize {
                            continue;
                        }
                        let src = &plane[y as usize * bw..][..bw];
                        let dst = &mut row[i * sw..][..sw];
                        for (j, d) in dst.iter_mut().enumerate() {
                            let x = (j * self.stride + kx) as isize - self.pad as isize;
                            if x >= 0 && x < bw as isize {
                                *d = src[x as usize];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`Geometry::im2col`], accumulating into `big`.
    fn col2im(&self, channels: usize, cols_mat: &[f64], big: &mut [f64]) {
        let k = self.kernel;
        let (bh, bw) = self.big;
        let (sh, sw) = self.small;
        let cols = sh * sw;
        for c in 0..channels {
            let plane = &mut big[c * bh * bw..(c + 1) * bh * bw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols_mat[((c * k + ky) * k + kx) * cols..][..cols];
                    for i in 0..sh {
                        let y = (i * self.stride + ky) as isize - self.pad as isize;
                        if y < 0 || y >= bh as isize {
                            continue;
                        }
                        let dst = &mut plane[y as usize * bw..][..bw];
                        let src = &row[i * sw..][..sw];
                        for (j, s) in src.iter().enumerate() {
                            let x = (j * self.stride + kx) as isize - self.pad as isize;
                            if x >= 0 && x < bw as isize {
                                dst[x as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Trainable weights of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(spec: &ConvSpec) -> Self {
        ConvLayer {
            weight: vec![0.0; spec.weight_len()],
            bias: vec![0.0; spec.c_out],
        }
    }

    pub fn add_assign(&mut self, other: &ConvLayer) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weight.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v *= s);
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter())
    }
}

fn check_input(spec: &ConvSpec, input: &Tensor) -> Result<()> {
    if input.channels != spec.c_in {
        return Err(Error::Shape(format!(
            "layer expects {} input channels, got {}",
            spec.c_in, input.channels
        )));
    }
    Ok(())
}

pub fn layer_forward(spec: &ConvSpec, layer: &ConvLayer, input: &Tensor) -> Result<Tensor> {
    check_input(spec, input)?;
    let g = spec.geometry(input.height, input.width)?;
    let k2 = spec.kernel * spec.kernel;
    let mut out = match spec.kind {
        LayerKind::Conv => {
            let (oh, ow) = g.small;
            let cols = g.im2col(spec.c_in, &input.data);
            let mut out = Tensor::zeros(spec.c_out, oh, ow);
            gemm(
                spec.c_out,
                spec.c_in * k2,
                oh * ow,
                &layer.weight,
                false,
                &cols,
                false,
                &mut out.data,
                false,
            );
            out
        }
        LayerKind::Deconv => {
            let (oh, ow) = g.big;
            let hw = input.spatial();
            let mut cols = vec![0.0; spec.c_out * k2 * hw];
            gemm(
                spec.c_out * k2,
                spec.c_in,
                hw,
                &layer.weight,
                true,
                &input.data,
                false,
                &mut cols,
                false,
            );
            let mut out = Tensor::zeros(spec.c_out, oh, ow);
            g.col2im(spec.c_out, &cols, &mut out.data);
            out
        }
    };
    let n = out.spatial();
    for (c, chunk) in out.data.chunks_mut(n).enumerate() {
        let b = layer.bias[c];
        match spec.activation {
            Activation::Relu => chunk.iter_mut().for_each(|v| *v = (*v + b).max(0.0)),
            Activation::None => chunk.iter_mut().for_each(|v| *v += b),
        }
    }
    Ok(out)
}

/// Back-propagates `grad_out` (with respect to the activated output) through
/// one layer. Returns the input gradient when requested and the parameter
/// gradients.
pub fn layer_backward(
    spec: &ConvSpec,
    layer: &ConvLayer,
    input: &Tensor,
    output: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<(Option<Tensor>, ConvLayer)> {
    let g = spec.geometry(input.height, input.width)?;
    let k2 = spec.kernel * spec.kernel;
    let mut delta = grad_out.clone();
    if spec.activation == Activation::Relu {
        for (d, o) in delta.data.iter_mut().zip(&output.data) {
            if *o <= 0.0 {
                *d = 0.0;
            }
        }
    }
    let n = delta.spatial();
    let bias: Vec<f64> = delta.data.chunks(n).map(|c| c.iter().sum()).collect();
    let mut grads = ConvLayer {
        weight: vec![0.0; spec.weight_len()],
        bias,
    };
    let grad_in = match spec.kind {
        LayerKind::Conv => {
            let (oh, ow) = g.small;
            let cols = g.im2col(spec.c_in, &input.data);
            // dW = delta * cols^T
            gemm(
                spec.c_out,
                oh * ow,
                spec.c_in * k2,
                &delta.data,
                false,
                &cols,
                true,
                &mut grads.weight,
                false,
            );
            if need_input_grad {
                let mut dcols = vec![0.0; spec.c_in * k2 * oh * ow];
                gemm(
                    spec.c_in * k2,
                    spec.c_out,
                    oh * ow,
                    &layer.weight,
                    true,
                    &delta.data,
                    false,
                    &mut dcols,
                    false,
                );
                let mut gi = Tensor::zeros(spec.c_in, input.height, input.width);
                g.col2im(spec.c_in, &dcols, &mut gi.data);
                Some(gi)
            } else {
                None
            }
        }
        LayerKind::Deconv => {
            let hw = input.spatial();
            let gcols = g.im2col(spec.c_out, &delta.data);
            // dW = X * gcols^T
            gemm(
                spec.c_in,
                hw,
                spec.c_out * k2,
                &input.data,
                false,
                &gcols,
                true,
                &mut grads.weight,
                false,
            );
            if need_input_grad {
                let mut gi = Tensor::zeros(spec.c_in, input.height, input.width);
                gemm(
                    spec.c_in,
                    spec.c_out * k2,
                    hw,
                    &layer.weight,
                    false,
                    &gcols,
                    false,
                    &mut gi.data,
                    false,
                );
                Some(gi)
            } else {
                None
            }
        }
    };
    Ok((grad_in, grads))
}

/// Activations of a layer chain; `activations[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    pub activations: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input")
    }
}

pub fn chain_forward(specs: &[ConvSpec], layers: &[ConvLayer], input: Tensor) -> Result<Trace> {
    let mut activations = Vec::with_capacity(specs.len() + 1);
    activations.push(input);
    for (spec, layer) in specs.iter().zip(layers) {
        let next = layer_forward(spec, layer, activations.last().expect("non-empty"))?;
        activations.push(next);
    }
    Ok(Trace { activations })
}

/// Output-only forward pass that keeps a single activation alive.
pub fn chain_infer(specs: &[ConvSpec], layers: &[ConvLayer], input: Tensor) -> Result<Tensor> {
    let mut x = input;
    for (spec, layer) in specs.iter().zip(layers) {
        x = layer_forward(spec, layer, &x)?;
    }
    Ok(x)
}

pub fn chain_backward(
    specs: &[ConvSpec],
    layers: &[ConvLayer],
    trace: &Trace,
    grad_out: Tensor,
    need_input_grad: bool,
) -> Result<(Option<Tensor>, Vec<ConvLayer>)> {
    let mut grads = vec![None; specs.len()];
    let mut grad = grad_out;
    for l in (0..specs.len()).rev() {
        let want = l > 0 || need_input_grad;
        let (gi, gp) = layer_backward(
            &specs[l],
            &layers[l],
            &trace.activations[l],
            &trace.activations[l + 1],
            &grad,
            want,
        )?;
        grads[l] = Some(gp);
        match gi {
            Some(g) => grad = g,
            None => {
                return Ok((None, grads.into_iter().map(|g| g.expect("filled")).collect()));
            }
        }
    }
    Ok((Some(grad), grads.into_iter().map(|g| g.expect("filled")).collect()))
}
