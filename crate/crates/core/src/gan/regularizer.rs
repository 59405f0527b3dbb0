//! Generator regularisation strategies, selected by name at run time.

use std::sync::Arc;

use super::loss::TrWeights;
use crate::registry::{Named, Registry};
use crate::taxonomy::Level;

/// Decides which center-distance terms enter the generator loss and with
/// what weight. Genus and family terms are fed from cross-knowledge
/// (sibling-semantics) pairs; the species term reuses the species batch.
pub trait Regularizer: Named + Send + Sync {
    fn description(&self) -> &'static str;

    /// Weighted terms, species first. Levels with zero weight may be omitted.
    fn terms(&self, weights: &TrWeights) -> Vec<(Level, f64)>;
}

/// Species, genus and family centers weighted by the configured weights.
pub struct TaxonomyRegularizer;

impl Named for TaxonomyRegularizer {
    fn name(&self) -> &'static str {
        "taxonomy"
    }
}

impl Regularizer for TaxonomyRegularizer {
    fn description(&self) -> &'static str {
        "species/genus/family center pull with sibling-semantics expansion"
    }

    fn terms(&self, weights: &TrWeights) -> Vec<(Level, f64)> {
        Level::ALL
            .into_iter()
            .map(|l| (l, weights.get(l)))
            .filter(|&(l, w)| l == Level::Species || w != 0.0)
            .collect()
    }
}

/// Species centers only; no taxonomy knowledge.
pub struct SpeciesCenterRegularizer;

impl Named for SpeciesCenterRegularizer {
    fn name(&self) -> &'static str {
        "species-center"
    }
}

impl Regularizer for SpeciesCenterRegularizer {
    fn description(&self) -> &'static str {
        "species center pull only (weights fixed to 1, 0, 0)"
    }

    fn terms(&self, _: &TrWeights) -> Vec<(Level, f64)> {
        vec![(Level::Species, 1.0)]
    }
}

/// Plain conditional WGAN with classification loss.
pub struct NoRegularizer;

impl Named for NoRegularizer {
    fn name(&self) -> &'static str {
        "none"
    }
}

impl Regularizer for NoRegularizer {
    fn description(&self) -> &'static str {
        "no center pull"
    }

    fn terms(&self, _: &TrWeights) -> Vec<(Level, f64)> {
        Vec::new()
    }
}

pub fn regularizers() -> Registry<dyn Regularizer> {
    let entries: [Arc<dyn Regularizer>; 3] = [
        Arc::new(TaxonomyRegularizer),
        Arc::new(SpeciesCenterRegularizer),
        Arc::new(NoRegularizer),
    ];
    entries
        .into_iter()
        .fold(Registry::new("regularizer"), Registry::with)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_ins() {
        let r = regularizers();
        assert_eq!(r.names(), vec!["taxonomy", "species-center", "none"]);
        let w = TrWeights::default();
        let t = r.get("taxonomy").unwrap().terms(&w);
        assert_eq!(
            t,
            vec![(Level::Species, 0.6), (Level::Genus, 0.2), (Level::Family, 0.2)]
        );
        assert_eq!(
            r.get("taxonomy").unwrap().terms(&TrWeights::species_only()),
            vec![(Level::Species, 1.0)]
        );
        assert!(r.get("none").unwrap().terms(&w).is_empty());
        assert!(r.get("bogus").is_err());
    }
}
