use crate::error::{Error, Result};
use crate::numerics::{Activation, Layer, MlpParams, SeededRng, Tape, Tensor};

/// Conditional generator `G(t, z)`: semantic vector and noise in, visual feature out.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub net: MlpParams,
    pub semantic_dim: usize,
    pub noise_dim: usize,
}

impl Generator {
    /// ReLU hidden layers, linear output.
    pub fn new(semantic_dim: usize, noise_dim: usize, hidden: &[usize], visual_dim: usize) -> Result<Self> {
        let mut dims = vec![semantic_dim + noise_dim];
        dims.extend_from_slice(hidden);
        dims.push(visual_dim);
        Ok(Self {
            net: MlpParams::new(&dims, Activation::Relu, Activation::Identity)?,
            semantic_dim,
            noise_dim,
        })
    }

    pub fn from_net(net: MlpParams, semantic_dim: usize, noise_dim: usize) -> Result<Self> {
        if net.in_dim() != semantic_dim + noise_dim {
            return Err(Error::ShapeMismatch(format!(
                "generator input width {} is not {semantic_dim} + {noise_dim}",
                net.in_dim()
            )));
        }
        Ok(Self {
            net,
            semantic_dim,
            noise_dim,
        })
    }

    pub fn visual_dim(&self) -> usize {
        self.net.out_dim()
    }

    /// One feature for one `(t, z)`.
    pub fn generate(&self, t: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let st = Tensor::from_vec(1, t.len(), t.to_vec())?;
        let zt = Tensor::from_vec(1, z.len(), z.to_vec())?;
        Ok(self.forward(&st, &zt)?.0.into_vec())
    }

    /// Batched forward; row `i` of the output is `G(semantics_i, noise_i)`.
    pub fn forward(&self, semantics: &Tensor, noise: &Tensor) -> Result<(Tensor, Tape)> {
        if semantics.cols() != self.semantic_dim || noise.cols() != self.noise_dim {
            return Err(Error::ShapeMismatch(format!(
                "generator expects {} semantic and {} noise columns, got {} and {}",
                self.semantic_dim,
                self.noise_dim,
                semantics.cols(),
                noise.cols()
            )));
        }
        self.net.forward(&semantics.hstack(noise)?)
    }

    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> Result<MlpParams> {
        Ok(self.net.backward(tape, upstream)?.0)
    }

    pub fn sample_noise(&self, rows: usize, rng: &mut SeededRng) -> Tensor {
        Tensor::from_vec(rows, self.noise_dim, rng.normal_vec(rows * self.noise_dim)).expect("sized")
    }
}

/// Critic with a shared trunk, a scalar realness head and a class-logit head.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub trunk: MlpParams,
    pub realness: Layer,
    pub classes: Layer,
}

/// Cached forward pass of the discriminator.
#[derive(Debug, Clone)]
pub struct DiscriminatorForward {
    pub realness: Tensor,
    pub logits: Tensor,
    features: Tensor,
    tape: Tape,
}

impl DiscriminatorForward {
    pub fn tape(&self) -> &Tape {
        &self.tape
    }
}

impl Discriminator {
    /// Leaky-ReLU trunk `visual_dim -> hidden...`; `hidden` must be non-empty.
    pub fn new(visual_dim: usize, hidden: &[usize], num_classes: usize) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::ShapeMismatch("discriminator needs a hidden layer".into()));
        }
        let mut dims = vec![visual_dim];
        dims.extend_from_slice(hidden);
        let width = *hidden.last().expect("non-empty");
        Ok(Self {
            trunk: MlpParams::new(&dims, Activation::leaky(), Activation::leaky())?,
            realness: Layer::zeros(width, 1, Activation::Identity),
            classes: Layer::zeros(width, num_classes, Activation::Identity),
        })
    }

    pub fn from_parts(trunk: MlpParams, realness: Layer, classes: Layer) -> Result<Self> {
        let w = trunk.out_dim();
        if realness.in_dim() != w || classes.in_dim() != w || realness.out_dim() != 1 {
            return Err(Error::ShapeMismatch(
                "discriminator heads must read the trunk output; realness is scalar".into(),
            ));
        }
        Ok(Self {
            trunk,
            realness,
            classes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.out_dim()
    }

    pub fn visual_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    pub fn init_normal(&mut self, rng: &mut SeededRng, std: f64) {
        self.trunk.init_normal(rng, std);
        let mut heads = MlpParams {
            layers: vec![self.realness.clone(), self.classes.clone()],
        };
        heads.init_normal(rng, std);
        self.classes = heads.layers.pop().expect("two heads");
        self.realness = heads.layers.pop().expect("two heads");
    }

    pub fn forward(&self, x: &Tensor) -> Result<DiscriminatorForward> {
        let (features, tape) = self.trunk.forward(x)?;
        let realness = self.realness.affine(&features)?;
        let logits = self.classes.affine(&features)?;
        realness.ensure_finite("critic output")?;
        logits.ensure_finite("class logits")?;
        Ok(DiscriminatorForward {
            realness,
            logits,
            features,
            tape,
        })
    }

    /// Parameter gradients (same shape as `self`) and input gradient, given
    /// upstream gradients for the realness column and, optionally, the logits.
    pub fn backward(
        &self,
        fwd: &DiscriminatorForward,
        d_realness: &Tensor,
        d_logits: Option<&Tensor>,
    ) -> Result<(Discriminator, Tensor)> {
        let mut grads = self.zeros_like();
        grads.realness.weight = d_realness.t_matmul(&fwd.features)?;
        grads.realness.bias = Tensor::from_vec(1, 1, d_realness.column_sums())?;
        let mut d_features = d_realness.matmul(&self.realness.weight)?;
        if let Some(dl) = d_logits {
            grads.classes.weight = dl.t_matmul(&fwd.features)?;
            grads.classes.bias = Tensor::from_vec(self.num_classes(), 1, dl.column_sums())?;
            d_features.add_assign(&dl.matmul(&self.classes.weight)?)?;
        }
        let (trunk, dx) = self.trunk.backward(&fwd.tape, &d_features)?;
        grads.trunk = trunk;
        Ok((grads, dx))
    }

    /// Per-row gradient of the realness score with respect to the input,
    /// with what is needed to differentiate a function of it.
    pub fn realness_input_gradient(&self, fwd: &DiscriminatorForward) -> Result<crate::numerics::InputGradient> {
        let rows = fwd.realness.rows();
        let w = self.realness.weight.row(0);
        let mut v = Tensor::zeros(rows, w.len());
        for r in 0..rows {
            v.row_mut(r).copy_from_slice(w);
        }
        self.trunk.input_gradient(&fwd.tape, &v)
    }

    /// Given `dL/du` for `u` from [`realness_input_gradient`](Self::realness_input_gradient),
    /// returns parameter gradients.
    pub fn realness_input_gradient_backward(
        &self,
        fwd: &DiscriminatorForward,
        ig: &crate::numerics::InputGradient,
        u_bar: &Tensor,
    ) -> Result<Discriminator> {
        let mut grads = self.zeros_like();
        let (trunk, v_bar) = self.trunk.input_gradient_backward(&fwd.tape, ig, u_bar)?;
        grads.trunk = trunk;
        grads.realness.weight = Tensor::from_vec(1, v_bar.cols(), v_bar.column_sums())?;
        Ok(grads)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            trunk: self.trunk.zeros_like(),
            realness: Layer::zeros(self.realness.in_dim(), 1, Activation::Identity),
            classes: Layer::zeros(self.classes.in_dim(), self.num_classes(), Activation::Identity),
        }
    }

    /// Trainable parameters. The realness bias is not one of them: a constant
    /// offset cancels in `mean(fake) - mean(real)` and has no input gradient,
    /// so it stays at zero.
    pub fn num_params(&self) -> usize {
        self.trunk.num_params() + self.realness.weight.as_slice().len() + self.classes.num_params()
    }

    /// Trunk, then realness weights, then class head.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.trunk.write_flat(&mut out);
        out.extend_from_slice(self.realness.weight.as_slice());
        out.extend_from_slice(self.classes.weight.as_slice());
        out.extend_from_slice(self.classes.bias.as_slice());
        out
    }

    pub fn read_flat(&mut self, flat: &[f64]) -> Result<usize> {
        if flat.len() < self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} flat values for {} discriminator parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut at = self.trunk.read_flat(flat)?;
        for t in [
            &mut self.realness.weight,
            &mut self.classes.weight,
            &mut self.classes.bias,
        ] {
            let n = t.as_slice().len();
            t.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(at)
    }

    pub fn add_assign(&mut self, other: &Discriminator) -> Result<()> {
        self.trunk.add_assign(&other.trunk)?;
        for (a, b) in [
            (&mut self.realness, &other.realness),
            (&mut self.classes, &other.classes),
        ] {
            a.weight.add_assign(&b.weight)?;
            a.bias.add_assign(&b.bias)?;
        }
        Ok(())
    }
}
