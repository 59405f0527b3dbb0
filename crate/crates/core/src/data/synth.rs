//! Hierarchically correlated synthetic datasets.
//!
//! Every taxonomy node gets a latent vector in `R^L` (`L` = semantic dim):
//! families `N(0, family_scale^2)`, genus offsets `N(0, genus_scale^2)` and
//! species offsets `N(0, species_scale^2)`. A species' latent is the sum along
//! its path. Two fixed random projections map latents to a visual mean
//! (`V x L`) and a semantic vector (`S x L`), so visual means decompose into
//! family mean + genus offset + species offset and the semantic vectors carry
//! the same hierarchy. Samples add isotropic `N(0, noise_scale^2)` noise to
//! the species' visual mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{SeededRng, Tensor};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub per_class: usize,
    pub visual_dim: usize,
    pub semantic_dim: usize,
    pub noise_scale: f64,
    pub family_scale: f64,
    pub genus_scale: f64,
    pub species_scale: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            per_class: 40,
            visual_dim: 8,
            semantic_dim: 6,
            noise_scale: 0.3,
            family_scale: 2.0,
            genus_scale: 1.0,
            species_scale: 0.7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 || self.visual_dim == 0 || self.semantic_dim == 0 {
            return Err(Error::InvalidConfig(
                "per_class, visual_dim and semantic_dim must be at least 1".into(),
            ));
        }
        let scales = [
            self.noise_scale,
            self.family_scale,
            self.genus_scale,
            self.species_scale,
        ];
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig("scales must be finite and non-negative".into()));
        }
        Ok(())
    }
}

pub fn synth_dataset(tax: &Taxonomy, spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let root = SeededRng::new(seed);
    let mut structure = root.substream("structure");
    let mut noise = root.substream("noise");
    let latent = spec.semantic_dim;

    let project = |rng: &mut SeededRng, rows: usize| -> Tensor {
        let scale = 1.0 / (latent as f64).sqrt();
        let data = (0..rows * latent).map(|_| rng.normal() * scale).collect();
        Tensor::from_vec(rows, latent, data).expect("sized")
    };
    let to_visual = project(&mut structure, spec.visual_dim);
    let to_semantic = project(&mut structure, spec.semantic_dim);

    let draw = |rng: &mut SeededRng, scale: f64| -> Vec<f64> {
        (0..latent).map(|_| rng.normal() * scale).collect()
    };
    let mut family_latent = BTreeMap::new();
    for f in tax.families() {
        family_latent.insert(f, draw(&mut structure, spec.family_scale));
    }
    let mut genus_latent = BTreeMap::new();
    for g in tax.genera() {
        genus_latent.insert(g, draw(&mut structure, spec.genus_scale));
    }

    let mut semantics = BTreeMap::new();
    let mut means = Vec::with_capacity(tax.num_species());
    for s in tax.species() {
        let own = draw(&mut structure, spec.species_scale);
        let f = &family_latent[&tax.family_of(s)?];
        let g = &genus_latent[&tax.genus_of(s)?];
        let z: Vec<f64> = (0..latent).map(|i| f[i] + g[i] + own[i]).collect();
        let zt = Tensor::from_vec(1, latent, z)?;
        means.push(zt.matmul_t(&to_visual)?.into_vec());
        semantics.insert(s, zt.matmul_t(&to_semantic)?.into_vec());
    }

    let n = tax.num_species() * spec.per_class;
    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * spec.visual_dim);
    for s in tax.species() {
        for _ in 0..spec.per_class {
            labels.push(s);
            values.extend(means[s].iter().map(|m| m + spec.noise_scale * noise.normal()));
        }
    }
    Dataset::new(Tensor::from_vec(n, spec.visual_dim, values)?, labels, semantics)
}
