//! Fully connected networks with exact reverse-mode gradients.
//!
//! Besides the usual forward/backward pair, [`MlpParams::input_gradient`] and
//! [`MlpParams::input_gradient_backward`] differentiate *through* the input
//! gradient, which is what a gradient penalty on a critic needs.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { alpha: f64 },
    Tanh,
}

impl Activation {
    pub const DEFAULT_LEAK: f64 = 0.2;

    pub fn leaky() -> Self {
        Activation::LeakyRelu {
            alpha: Self::DEFAULT_LEAK,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    #[inline]
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            _ => 0.0,
        }
    }

    /// Whether the second derivative vanishes almost everywhere.
    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out x in`
    pub weight: Tensor,
    /// `out x 1`
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: Tensor::zeros(output, input),
            bias: Tensor::zeros(output, 1),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Pre-activation `H W^T + b` for a batch `H`.
    pub fn affine(&self, input: &Tensor) -> Result<Tensor> {
        let mut a = input.matmul_t(&self.weight)?;
        a.add_row_vector(self.bias.as_slice())?;
        Ok(a)
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.as_slice().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Cached values of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Tensor>,
    /// Pre-activation of each layer.
    pre: Vec<Tensor>,
}

impl Tape {
    pub fn input(&self) -> &Tensor {
        &self.inputs[0]
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }

    pub fn pre_activations(&self) -> &[Tensor] {
        &self.pre
    }
}

/// Input gradient `u = J(x)^T v` with the intermediates needed to
/// differentiate it again.
#[derive(Debug, Clone)]
pub struct InputGradient {
    pub value: Tensor,
    /// Upstream gradient arriving at each layer's output.
    upstream: Vec<Tensor>,
    /// Gradient with respect to each layer's pre-activation.
    deltas: Vec<Tensor>,
}

impl MlpParams {
    /// Zero-initialised network. `dims` lists input, hidden and output widths.
    pub fn new(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "network needs at least two non-zero widths, got {dims:?}"
            )));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer::zeros(w[0], w[1], if i + 1 == n { output } else { hidden }))
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network without layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} emits {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.shape() != (l.out_dim(), 1) {
                return Err(Error::ShapeMismatch(format!("layer {i} bias shape")));
            }
        }
        Ok(Self { layers })
    }

    /// Weights drawn from `N(0, std^2)`, biases zero.
    pub fn init_normal<R: Rng + ?Sized>(&mut self, rng: &mut R, std: f64) {
        let normal = Normal::new(0.0, std).expect("finite std");
        for layer in &mut self.layers {
            for w in layer.weight.as_mut_slice() {
                *w = normal.sample(rng);
            }
            layer.bias.as_mut_slice().fill(0.0);
        }
    }

    /// Smallest distance from any recorded pre-activation to a kink of its
    /// layer's activation (`inf` when no layer has a kink).
    pub fn kink_distance(&self, tape: &Tape) -> f64 {
        self.layers
            .iter()
            .zip(tape.pre_activations())
            .filter(|(l, _)| matches!(l.activation, Activation::Relu | Activation::LeakyRelu { .. }))
            .flat_map(|(_, pre)| pre.as_slice().iter().map(|a| a.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim(), l.out_dim(), l.activation))
                .collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Parameters in layer order, each layer's weight (row-major) then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.write_flat(&mut out);
        out
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
    }

    /// Inverse of [`to_flat`](Self::to_flat); returns the number of values consumed.
    pub fn read_flat(&mut self, flat: &[f64]) -> Result<usize> {
        if flat.len() < self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} flat values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            for t in [&mut l.weight, &mut l.bias] {
                let n = t.as_slice().len();
                t.as_mut_slice().copy_from_slice(&flat[at..at + n]);
                at += n;
            }
        }
        Ok(at)
    }

    pub fn add_assign(&mut self, other: &MlpParams) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::ShapeMismatch("networks differ in depth".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight)?;
            a.bias.add_assign(&b.bias)?;
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Tape)> {
        if input.cols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} input columns, got {}",
                self.in_dim(),
                input.cols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = input.clone();
        for layer in &self.layers {
            let a = layer.affine(&h)?;
            let next = a.map(|x| layer.activation.apply(x));
            inputs.push(h);
            pre.push(a);
            h = next;
        }
        h.ensure_finite("network output")?;
        Ok((h, Tape { inputs, pre }))
    }

    /// Reverse-mode gradients of a scalar whose gradient with respect to the
    /// network output is `upstream`. Returns parameter gradients and the
    /// gradient with respect to the input.
    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> Result<(MlpParams, Tensor)> {
        self.check_tape(tape)?;
        let expect = (tape.batch_size(), self.out_dim());
        if upstream.shape() != expect {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient is {:?}, expected {expect:?}",
                upstream.shape()
            )));
        }
        self.backward_inner(tape, Some(upstream), None)
    }

    fn backward_inner(
        &self,
        tape: &Tape,
        upstream: Option<&Tensor>,
        inject: Option<&[Tensor]>,
    ) -> Result<(MlpParams, Tensor)> {
        let mut grads = self.zeros_like();
        let n = tape.batch_size();
        let mut h_bar = match upstream {
            Some(u) => u.clone(),
            None => Tensor::zeros(n, self.out_dim()),
        };
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let mut a_bar = tape.pre[l].zip_map(&h_bar, |a, g| g * act.derivative(a))?;
            if let Some(inj) = inject {
                a_bar.add_assign(&inj[l])?;
            }
            grads.layers[l].weight = a_bar.t_matmul(&tape.inputs[l])?;
            grads.layers[l].bias = Tensor::from_vec(layer.out_dim(), 1, a_bar.column_sums())?;
            h_bar = a_bar.matmul(&layer.weight)?;
        }
        Ok((grads, h_bar))
    }

    /// Computes `u = J(x)^T v` row by row, where `J` is the Jacobian of the
    /// network output with respect to its input and `v` has one row per sample.
    pub fn input_gradient(&self, tape: &Tape, v: &Tensor) -> Result<InputGradient> {
        self.check_tape(tape)?;
        let expect = (tape.batch_size(), self.out_dim());
        if v.shape() != expect {
            return Err(Error::ShapeMismatch(format!(
                "vector for input gradient is {:?}, expected {expect:?}",
                v.shape()
            )));
        }
        let depth = self.layers.len();
        let mut upstream = vec![Tensor::zeros(0, 0); depth];
        let mut deltas = vec![Tensor::zeros(0, 0); depth];
        let mut g = v.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let delta = tape.pre[l].zip_map(&g, |a, gv| gv * act.derivative(a))?;
            let next = delta.matmul(&layer.weight)?;
            upstream[l] = g;
            deltas[l] = delta;
            g = next;
        }
        Ok(InputGradient {
            value: g,
            upstream,
            deltas,
        })
    }

    /// Given `u_bar = dL/du` for `u` from [`input_gradient`](Self::input_gradient),
    /// returns `dL/dparams` and `dL/dv`.
    pub fn input_gradient_backward(
        &self,
        tape: &Tape,
        ig: &InputGradient,
        u_bar: &Tensor,
    ) -> Result<(MlpParams, Tensor)> {
        if u_bar.shape() != ig.value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "input-gradient adjoint is {:?}, expected {:?}",
                u_bar.shape(),
                ig.value.shape()
            )));
        }
        let mut grads = self.zeros_like();
        let mut inject = Vec::with_capacity(self.layers.len());
        let mut g_bar = u_bar.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = layer.activation;
            // g_{l-1} = delta_l W_l
            let delta_bar = g_bar.matmul_t(&layer.weight)?;
            grads.layers[l].weight = ig.deltas[l].t_matmul(&g_bar)?;
            // delta_l = g_l * act'(a_l)
            let next_bar = tape.pre[l].zip_map(&delta_bar, |a, d| d * act.derivative(a))?;
            let mut a_bar = Tensor::zeros(delta_bar.rows(), delta_bar.cols());
            if !act.is_piecewise_linear() {
                for ((o, (&d, &g)), &a) in a_bar
                    .as_mut_slice()
                    .iter_mut()
                    .zip(delta_bar.as_slice().iter().zip(ig.upstream[l].as_slice()))
                    .zip(tape.pre[l].as_slice())
                {
                    *o = d * g * act.second_derivative(a);
                }
            }
            inject.push(a_bar);
            g_bar = next_bar;
        }
        if inject.iter().any(|t| t.as_slice().iter().any(|&x| x != 0.0)) {
            let (second, _) = self.backward_inner(tape, None, Some(&inject))?;
            grads.add_assign(&second)?;
        }
        Ok((grads, g_bar))
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "tape has {} layers, network has {}",
                tape.pre.len(),
                self.layers.len()
            )));
        }
        for (l, (p, layer)) in tape.pre.iter().zip(&self.layers).enumerate() {
            if p.cols() != layer.out_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "tape layer {l} width {} does not match network width {}",
                    p.cols(),
                    layer.out_dim()
                )));
            }
        }
        Ok(())
    }
}
