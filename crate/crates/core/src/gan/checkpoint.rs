//! Self-describing JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Discriminator, Generator};
use super::train::{TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::numerics::{Activation, Layer, MlpParams, Tensor};
use crate::taxonomy::SpeciesId;

pub const FORMAT: &str = "taxozsl-checkpoint";
pub const VERSION: u32 = 1;
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// `out_dim` rows of `in_dim` weights.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl From<&Layer> for LayerRecord {
    fn from(l: &Layer) -> Self {
        Self {
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            activation: l.activation,
            weight: l.weight.row_iter().map(<[f64]>::to_vec).collect(),
            bias: l.bias.as_slice().to_vec(),
        }
    }
}

impl LayerRecord {
    fn to_layer(&self) -> Result<Layer> {
        let bad = |m: String| Error::Checkpoint(m);
        if self.weight.len() != self.out_dim || self.bias.len() != self.out_dim {
            return Err(bad(format!(
                "layer declares {} outputs but has {} weight rows and {} biases",
                self.out_dim,
                self.weight.len(),
                self.bias.len()
            )));
        }
        if self.weight.iter().any(|r| r.len() != self.in_dim) {
            return Err(bad(format!("layer weight rows must have {} entries", self.in_dim)));
        }
        if self.out_dim == 0 || self.in_dim == 0 {
            return Err(bad("layer with zero width".into()));
        }
        Ok(Layer {
            weight: Tensor::from_rows(&self.weight)?,
            bias: Tensor::from_vec(self.out_dim, 1, self.bias.clone())?,
            activation: self.activation,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub visual: usize,
    pub semantic: usize,
    pub noise: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub rng: String,
    pub seed: u64,
    pub iterations: usize,
    pub dims: Dims,
    /// Seen classes in discriminator-head order.
    pub classes: Vec<SpeciesId>,
    pub config: TrainConfig,
    pub generator: Vec<LayerRecord>,
    pub discriminator_trunk: Vec<LayerRecord>,
    pub discriminator_realness: LayerRecord,
    pub discriminator_classes: LayerRecord,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome, config: &TrainConfig) -> Self {
        let g = &outcome.generator;
        let d = &outcome.discriminator;
        Self {
            format: FORMAT.into(),
            version: VERSION,
            rng: RNG_ALGORITHM.into(),
            seed: config.seed,
            iterations: outcome.log.len(),
            dims: Dims {
                visual: g.visual_dim(),
                semantic: g.semantic_dim,
                noise: g.noise_dim,
            },
            classes: outcome.classes.clone(),
            config: config.clone(),
            generator: g.net.layers.iter().map(LayerRecord::from).collect(),
            discriminator_trunk: d.trunk.layers.iter().map(LayerRecord::from).collect(),
            discriminator_realness: (&d.realness).into(),
            discriminator_classes: (&d.classes).into(),
        }
    }

    pub fn generator(&self) -> Result<Generator> {
        let net = mlp(&self.generator)?;
        let g = Generator::from_net(net, self.dims.semantic, self.dims.noise)?;
        if g.visual_dim() != self.dims.visual {
            return Err(Error::Checkpoint(format!(
                "generator emits {} features, header says {}",
                g.visual_dim(),
                self.dims.visual
            )));
        }
        Ok(g)
    }

    pub fn discriminator(&self) -> Result<Discriminator> {
        Discriminator::from_parts(
            mlp(&self.discriminator_trunk)?,
            self.discriminator_realness.to_layer()?,
            self.discriminator_classes.to_layer()?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: expected {FORMAT} version {VERSION}, found {} version {}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        // Build once so a malformed file fails here rather than at first use.
        ck.generator()?;
        ck.discriminator()?;
        Ok(ck)
    }
}

fn mlp(records: &[LayerRecord]) -> Result<MlpParams> {
    let layers = records
        .iter()
        .map(LayerRecord::to_layer)
        .collect::<Result<Vec<_>>>()?;
    MlpParams::from_layers(layers).map_err(|e| Error::Checkpoint(e.to_string()))
}
