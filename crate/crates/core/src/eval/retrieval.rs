//! Ranked retrieval from a class's synthesized center.

use super::bank::SynthesizedBank;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::euclidean;
use crate::taxonomy::SpeciesId;

pub const FRACTIONS: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub class: SpeciesId,
    pub fraction: f64,
    /// Gallery row indices, nearest first, up to and including the position
    /// where the target number of relevant items is reached.
    pub ranked: Vec<usize>,
    pub average_precision: f64,
}

/// Number of relevant items a query at `fraction` must retrieve.
pub fn target_count(fraction: f64, relevant: usize) -> usize {
    ((fraction * relevant as f64 - 1e-9).ceil() as usize).clamp(1, relevant.max(1))
}

/// Walks `relevance` in rank order until `target` relevant items are seen
/// and averages precision@i over those hit positions. Returns the AP and
/// the number of ranks walked.
pub fn average_precision(relevance: &[bool], target: usize) -> (f64, usize) {
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
            if hits == target {
                return (sum / target as f64, i + 1);
            }
        }
    }
    let ap = if hits == 0 { 0.0 } else { sum / target as f64 };
    (ap, relevance.len())
}

/// Ranks `gallery` by distance to the mean of class `c`'s bank features.
/// Equal distances keep gallery order.
pub fn retrieve(
    bank: &SynthesizedBank,
    c: SpeciesId,
    gallery: &Dataset,
    fraction: f64,
) -> Result<Retrieval> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "retrieval fraction {fraction} is outside (0, 1]"
        )));
    }
    let center = bank.center(c)?;
    if center.len() != gallery.visual_dim() {
        return Err(Error::ShapeMismatch(format!(
            "bank features have {} entries, gallery has {}",
            center.len(),
            gallery.visual_dim()
        )));
    }
    let relevant = gallery.labels().iter().filter(|&&y| y == c).count();
    if relevant == 0 {
        return Err(Error::UnknownClass(c));
    }
    let dist: Vec<f64> = (0..gallery.len())
        .map(|i| euclidean(gallery.x(i), &center))
        .collect();
    let mut order: Vec<usize> = (0..gallery.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let relevance: Vec<bool> = order.iter().map(|&i| gallery.label(i) == c).collect();
    let (ap, walked) = average_precision(&relevance, target_count(fraction, relevant));
    order.truncate(walked);
    Ok(Retrieval {
        class: c,
        fraction,
        ranked: order,
        average_precision: ap,
    })
}

/// Retrievals for every class in `classes`, and their mean AP.
pub fn mean_average_precision(
    bank: &SynthesizedBank,
    classes: &[SpeciesId],
    gallery: &Dataset,
    fraction: f64,
) -> Result<(f64, Vec<Retrieval>)> {
    if classes.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let runs = classes
        .iter()
        .map(|&c| retrieve(bank, c, gallery, fraction))
        .collect::<Result<Vec<_>>>()?;
    let map = runs.iter().map(|r| r.average_precision).sum::<f64>() / runs.len() as f64;
    Ok((map, runs))
}
