//! Training loop.
//!
//! Per iteration: `critic_steps` discriminator updates on species-level
//! pairs, then one generator update whose loss is the critic term, the
//! classification term and the weighted center-distance terms. Species terms
//! reuse the generator's species batch; genus and family terms draw their own
//! batches of cross-knowledge pairs and compare against the center of the
//! *sample's* genus or family. Each term is a mean over its own batch.
//! Batches are drawn with replacement from a dedicated seeded stream.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::TrWeights;
use super::model::{Discriminator, Generator};
use super::objective::{
    discriminator_objective, generator_objective, DiscriminatorBatch, DiscriminatorWeights,
    GeneratorBatch, GeneratorWeights, LevelBatch,
};
use super::regularizer::regularizers;
use crate::data::{ckl_expand, compute_centers, CenterTable, CklDataset, Dataset};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, SeededRng, Tensor};
use crate::table::write_table;
use crate::taxonomy::{Level, SpeciesId, Taxonomy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub critic_steps: usize,
    pub gp_weight: f64,
    pub cls_weight: f64,
    pub tr_weights: TrWeights,
    pub regularizer: String,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 32,
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            critic_steps: 5,
            gp_weight: 10.0,
            cls_weight: 1.0,
            tr_weights: TrWeights::default(),
            regularizer: "taxonomy".into(),
            noise_dim: 16,
            generator_hidden: vec![64],
            discriminator_hidden: vec![64],
            init_std: 0.02,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch_size == 0 || self.critic_steps == 0 || self.noise_dim == 0 {
            return bad("batch_size, critic_steps and noise_dim must be at least 1");
        }
        let rates = [self.lr_generator, self.lr_discriminator, self.init_std];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("learning rates and init_std must be positive");
        }
        if ![self.gp_weight, self.cls_weight]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
        {
            return bad("gp_weight and cls_weight must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.discriminator_hidden.is_empty()
            || self.discriminator_hidden.contains(&0)
            || self.generator_hidden.contains(&0)
        {
            return bad("hidden widths must be positive and the discriminator needs one");
        }
        regularizers().get(&self.regularizer)?;
        // re-check in case the struct was built by hand
        let w = self.tr_weights.as_array();
        TrWeights::new(w[0], w[1], w[2])?;
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    /// Critic values are averaged over the iteration's critic steps.
    pub loss_d: f64,
    pub wass_d: f64,
    pub gp: f64,
    pub cls_d: f64,
    pub loss_g: f64,
    pub wass_g: f64,
    pub cls_g: f64,
    pub tr_species: f64,
    pub tr_genus: f64,
    pub tr_family: f64,
}

impl LogRow {
    pub const HEADER: &'static str =
        "iter,loss_D,wass,gp,cls_D,loss_G,wass_G,cls_G,tr_species,tr_genus,tr_family";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.iteration,
            self.loss_d,
            self.wass_d,
            self.gp,
            self.cls_d,
            self.loss_g,
            self.wass_g,
            self.cls_g,
            self.tr_species,
            self.tr_genus,
            self.tr_family
        )
    }

    /// Weighted regulariser value under `w`.
    pub fn tr_total(&self, w: [f64; 3]) -> f64 {
        w[0] * self.tr_species + w[1] * self.tr_genus + w[2] * self.tr_family
    }
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    write_table(path, LogRow::HEADER, rows.iter().map(LogRow::to_csv))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    /// Seen classes in discriminator-head order.
    pub classes: Vec<SpeciesId>,
    pub log: Vec<LogRow>,
}

/// Per-sample lookups shared by every batch.
struct Pools<'a> {
    data: &'a Dataset,
    species: CklDataset,
    extra: Vec<(Level, CklDataset)>,
    centers: CenterTable,
    tax: &'a Taxonomy,
}

impl Pools<'_> {
    fn semantics(&self, classes: impl Iterator<Item = SpeciesId>) -> Result<Tensor> {
        let rows: Vec<&[f64]> = classes
            .map(|c| self.data.semantic(c).expect("expanded from dataset classes"))
            .collect();
        Tensor::from_rows(&rows)
    }

    fn centers(&self, labels: impl Iterator<Item = SpeciesId>, level: Level) -> Result<Tensor> {
        let rows = labels
            .map(|y| self.centers.for_species(self.tax, y, level))
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&rows)
    }
}

pub fn train(seen: &Dataset, tax: &Taxonomy, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if seen.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    seen.validate_against(tax)?;
    let regularizer = regularizers().get(&cfg.regularizer)?;
    let terms = regularizer.terms(&cfg.tr_weights);
    let classes = seen.classes();
    let class_index = |y: SpeciesId| classes.binary_search(&y).expect("label of seen set");

    let root = SeededRng::new(cfg.seed);
    let mut init = root.substream("init");
    let mut g = Generator::new(
        seen.semantic_dim(),
        cfg.noise_dim,
        &cfg.generator_hidden,
        seen.visual_dim(),
    )?;
    g.net.init_normal(&mut init, cfg.init_std);
    let mut d = Discriminator::new(seen.visual_dim(), &cfg.discriminator_hidden, classes.len())?;
    d.init_normal(&mut init, cfg.init_std);

    let mut log = Vec::with_capacity(cfg.iterations);
    if cfg.iterations == 0 {
        return Ok(TrainOutcome {
            generator: g,
            discriminator: d,
            classes,
            log,
        });
    }

    let mut tr_weights = [0.0; 3];
    let mut extra = Vec::new();
    for &(level, w) in &terms {
        let slot = Level::ALL.iter().position(|&l| l == level).expect("level");
        tr_weights[slot] = w;
        if level != Level::Species {
            extra.push((level, ckl_expand(seen, tax, level)?));
        }
    }
    let pools = Pools {
        data: seen,
        species: ckl_expand(seen, tax, Level::Species)?,
        extra,
        centers: compute_centers(seen, tax)?,
        tax,
    };
    let gen_weights = GeneratorWeights {
        wasserstein: 1.0,
        classification: cfg.cls_weight,
        regularizer: tr_weights,
    };
    let disc_weights = DiscriminatorWeights {
        wasserstein: 1.0,
        gradient_penalty: cfg.gp_weight,
        classification: cfg.cls_weight,
    };

    let mut rng = root.substream("batches");
    let mut g_params = g.net.to_flat();
    let mut d_params = d.to_flat();
    let mut g_opt = AdamState::with_betas(g_params.len(), cfg.adam_beta1, cfg.adam_beta2, 1e-8);
    let mut d_opt = AdamState::with_betas(d_params.len(), cfg.adam_beta1, cfg.adam_beta2, 1e-8);
    let b = cfg.batch_size;

    for iteration in 0..cfg.iterations {
        let diverged = |e: Error| match e {
            Error::NonFinite(what) => Error::Diverged { iteration, what },
            other => other,
        };

        let mut critic = [0.0; 4];
        for _ in 0..cfg.critic_steps {
            let pick = draw(&pools.species, b, &mut rng);
            let rows: Vec<usize> = pick.iter().map(|p| p.0).collect();
            let real = seen.visual().select_rows(&rows);
            let semantics = pools.semantics(pick.iter().map(|p| p.2))?;
            let noise = g.sample_noise(b, &mut rng);
            let (fake, _) = g.forward(&semantics, &noise).map_err(diverged)?;
            let batch = DiscriminatorBatch {
                real,
                fake,
                labels: pick.iter().map(|p| class_index(p.1)).collect(),
                alphas: (0..b).map(|_| rng.uniform()).collect(),
            };
            let loss = discriminator_objective(&d, &batch, &disc_weights).map_err(diverged)?;
            d_opt
                .step(&mut d_params, &loss.grads.to_flat(), cfg.lr_discriminator)
                .map_err(diverged)?;
            d.read_flat(&d_params)?;
            for (acc, v) in critic.iter_mut().zip([
                loss.total,
                loss.wasserstein,
                loss.gradient_penalty,
                loss.classification,
            ]) {
                *acc += v / cfg.critic_steps as f64;
            }
        }

        let pick = draw(&pools.species, b, &mut rng);
        let species = LevelBatch {
            semantics: pools.semantics(pick.iter().map(|p| p.2))?,
            noise: g.sample_noise(b, &mut rng),
            centers: pools.centers(pick.iter().map(|p| p.1), Level::Species)?,
        };
        let mut batch = GeneratorBatch {
            species,
            labels: pick.iter().map(|p| class_index(p.1)).collect(),
            genus: None,
            family: None,
        };
        for (level, pool) in &pools.extra {
            let pick = draw(pool, b, &mut rng);
            let lb = LevelBatch {
                semantics: pools.semantics(pick.iter().map(|p| p.2))?,
                noise: g.sample_noise(b, &mut rng),
                centers: pools.centers(pick.iter().map(|p| p.1), *level)?,
            };
            match level {
                Level::Genus => batch.genus = Some(lb),
                Level::Family => batch.family = Some(lb),
                Level::Species => unreachable!("species pairs come from the main batch"),
            }
        }
        let loss = generator_objective(&g, &d, &batch, &gen_weights).map_err(diverged)?;
        g_opt
            .step(&mut g_params, &loss.grads.to_flat(), cfg.lr_generator)
            .map_err(diverged)?;
        g.net.read_flat(&g_params)?;

        let row = LogRow {
            iteration,
            loss_d: critic[0],
            wass_d: critic[1],
            gp: critic[2],
            cls_d: critic[3],
            loss_g: loss.total,
            wass_g: loss.wasserstein,
            cls_g: loss.classification,
            tr_species: loss.regularizer[0],
            tr_genus: loss.regularizer[1],
            tr_family: loss.regularizer[2],
        };
        if ![row.loss_d, row.loss_g].iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                iteration,
                what: "loss".into(),
            });
        }
        log.push(row);
    }

    Ok(TrainOutcome {
        generator: g,
        discriminator: d,
        classes,
        log,
    })
}

/// `(sample row, label, semantic source)` drawn uniformly with replacement.
fn draw(pool: &CklDataset, n: usize, rng: &mut SeededRng) -> Vec<(usize, SpeciesId, SpeciesId)> {
    (0..n)
        .map(|_| {
            let p = pool.pairs[rng.below(pool.len())];
            (p.sample, p.label, p.semantic_source)
        })
        .collect()
}
