//! Nearest-neighbour classification against a feature bank.

use rayon::prelude::*;

use super::bank::SynthesizedBank;
use crate::error::{Error, Result};
use crate::numerics::{euclidean, Tensor};
use crate::taxonomy::SpeciesId;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: SpeciesId,
    /// Aligned with `bank.classes()`: minus the distance to the class's
    /// nearest bank feature.
    pub scores: Vec<f64>,
}

/// Majority label among the `k` nearest bank features.
///
/// Neighbours at equal distance are taken in class-id order. A tied vote
/// goes to the class whose voting neighbours are closer on average, then to
/// the smaller class id.
pub fn classify(bank: &SynthesizedBank, x: &[f64], k: usize) -> Result<Prediction> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if x.len() != bank.dim() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} features, bank has {}",
            x.len(),
            bank.dim()
        )));
    }
    let labels = bank.labels();
    let feats = bank.features();
    let mut scores = vec![f64::NEG_INFINITY; bank.classes().len()];
    let mut dist: Vec<(f64, SpeciesId)> = Vec::with_capacity(bank.len());
    // Rows are grouped by class, so the class slot advances monotonically.
    let mut slot = 0;
    for (r, &c) in labels.iter().enumerate() {
        while bank.classes()[slot] != c {
            slot += 1;
        }
        let d = euclidean(x, feats.row(r));
        if !d.is_finite() {
            return Err(Error::NonFinite(format!("distance to bank row {r}")));
        }
        scores[slot] = scores[slot].max(-d);
        dist.push((d, c));
    }

    let k = k.min(dist.len());
    let cmp = |a: &(f64, SpeciesId), b: &(f64, SpeciesId)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, cmp);
        dist.truncate(k);
    }
    dist.sort_by(cmp);

    // (votes, summed distance) per class among the neighbours
    let mut tally: Vec<(SpeciesId, usize, f64)> = Vec::new();
    for &(d, c) in &dist {
        match tally.iter_mut().find(|t| t.0 == c) {
            Some(t) => {
                t.1 += 1;
                t.2 += d;
            }
            None => tally.push((c, 1, d)),
        }
    }
    let best = tally
        .into_iter()
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then((a.2 / a.1 as f64).total_cmp(&(b.2 / b.1 as f64)))
                .then(a.0.cmp(&b.0))
        })
        .expect("k >= 1");
    Ok(Prediction {
        label: best.0,
        scores,
    })
}

/// [`classify`] over every row of `queries`, in parallel; output order
/// matches the rows.
pub fn classify_all(bank: &SynthesizedBank, queries: &Tensor, k: usize) -> Result<Vec<Prediction>> {
    (0..queries.rows())
        .into_par_iter()
        .map(|r| classify(bank, queries.row(r), k))
        .collect()
}
