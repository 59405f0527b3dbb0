//! The desk-scale synthetic zero-shot run: generate data over a small
//! taxonomy, train on the seen classes, and score synthesized unseen features.

use std::collections::BTreeMap;

use crate::data::{synth_dataset, Dataset, SynthSpec};
use crate::error::Result;
use crate::eval::{classify_all, synthesize_bank, top1_per_class, DEFAULT_SYNTH_PER_CLASS};
use crate::gan::{train, TrainConfig};
use crate::numerics::derive_seed;
use crate::taxonomy::{make_split, SpeciesId, SplitMode, SplitSpec, Taxonomy};

/// `families` families of `genera` genera of `species` species, numbered so
/// that species `s` sits in genus `s / species` and family `s / (genera * species)`.
pub fn balanced_taxonomy(families: usize, genera: usize, species: usize) -> Result<Taxonomy> {
    let records: Vec<(usize, usize, usize)> = (0..families * genera * species)
        .map(|s| (s, s / species, s / (genera * species)))
        .collect();
    Taxonomy::build(&records)
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub synth: SynthSpec,
    pub unseen_fraction: f64,
    pub train: TrainConfig,
    pub synth_per_class: usize,
    pub k: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            synth: SynthSpec::default(),
            unseen_fraction: 1.0 / 3.0,
            train: TrainConfig::default(),
            synth_per_class: DEFAULT_SYNTH_PER_CLASS,
            k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub unseen: Vec<SpeciesId>,
    pub unseen_top1: f64,
    /// Mean distance of synthesized unseen features to the real class means.
    pub mean_distance: f64,
}

/// Per-class means of the real samples.
pub fn class_means(d: &Dataset) -> BTreeMap<SpeciesId, Vec<f64>> {
    d.classes()
        .into_iter()
        .map(|c| {
            let rows = d.indices_of(c);
            let mut m = vec![0.0; d.visual_dim()];
            for &i in &rows {
                for (a, x) in m.iter_mut().zip(d.x(i)) {
                    *a += x;
                }
            }
            m.iter_mut().for_each(|a| *a /= rows.len() as f64);
            (c, m)
        })
        .collect()
}

/// One run with every stage seeded from `seed`. The train seed in `spec` is
/// replaced.
pub fn run_experiment(tax: &Taxonomy, spec: &ExperimentSpec, seed: u64) -> Result<ExperimentResult> {
    let data = synth_dataset(tax, &spec.synth, derive_seed(seed, "data"))?;
    let split = make_split(
        tax,
        &SplitSpec {
            mode: SplitMode::Easy,
            unseen_fraction: spec.unseen_fraction,
            seed: derive_seed(seed, "split"),
        },
    )?;
    let seen = data.restrict(&split.seen);
    let unseen = data.restrict(&split.unseen);
    let cfg = TrainConfig {
        seed: derive_seed(seed, "train"),
        ..spec.train.clone()
    };
    let outcome = train(&seen, tax, &cfg)?;
    let semantics: BTreeMap<_, _> = split
        .unseen
        .iter()
        .map(|&c| (c, data.semantics()[&c].clone()))
        .collect();
    let bank = synthesize_bank(
        &outcome.generator,
        &semantics,
        spec.synth_per_class,
        derive_seed(seed, "eval"),
    )?;
    let preds = classify_all(&bank, unseen.visual(), spec.k)?;
    let pairs: Vec<_> = unseen.labels().iter().zip(&preds).map(|(&y, p)| (y, p.label)).collect();
    Ok(ExperimentResult {
        unseen_top1: top1_per_class(&pairs, &split.unseen)?,
        mean_distance: bank.mean_distance_to(&class_means(&unseen))?,
        unseen: split.unseen,
    })
}
