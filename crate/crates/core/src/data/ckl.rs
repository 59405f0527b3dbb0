//! Cross-knowledge expansion of training samples.
//!
//! At the genus and family levels each sample is paired with the semantic
//! vector of every similar class (itself included), one generator input per
//! pair. Only classes that carry a semantic vector in the dataset take part,
//! so a seen-class training set never pulls in unseen semantics.

use super::Dataset;
use crate::error::{Error, Result};
use crate::taxonomy::{Level, SpeciesId, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CklPair {
    /// Row of the source dataset.
    pub sample: usize,
    pub label: SpeciesId,
    /// Class whose semantic vector conditions the generator.
    pub semantic_source: SpeciesId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CklDataset {
    pub level: Level,
    pub pairs: Vec<CklPair>,
}

impl CklDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn ckl_expand(d: &Dataset, tax: &Taxonomy, level: Level) -> Result<CklDataset> {
    let mut pairs = Vec::with_capacity(d.len());
    for (i, &y) in d.labels().iter().enumerate() {
        if !tax.contains(y) {
            return Err(Error::UnknownSpecies(y));
        }
        for &k in tax.similar_classes(y, level)? {
            if d.semantic(k).is_some() {
                pairs.push(CklPair {
                    sample: i,
                    label: y,
                    semantic_source: k,
                });
            }
        }
    }
    Ok(CklDataset { level, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthSpec};
    use crate::numerics::{SeededRng, Tensor};
    use std::collections::BTreeMap;

    fn dataset(labels: Vec<usize>, classes: &[usize]) -> Dataset {
        let n = labels.len();
        let sem: BTreeMap<usize, Vec<f64>> = classes.iter().map(|&c| (c, vec![c as f64])).collect();
        Dataset::new(Tensor::zeros(n, 1), labels, sem).unwrap()
    }

    #[test]
    fn species_level_is_identity() {
        let tax = Taxonomy::build(&[(0, 0, 0), (1, 0, 0), (2, 1, 0)]).unwrap();
        let d = dataset(vec![2, 0, 1, 0], &[0, 1, 2]);
        let e = ckl_expand(&d, &tax, Level::Species).unwrap();
        assert_eq!(e.len(), 4);
        for (i, p) in e.pairs.iter().enumerate() {
            assert_eq!((p.sample, p.label, p.semantic_source), (i, d.label(i), d.label(i)));
        }
    }

    #[test]
    fn genus_expansion_of_two_samples() {
        let tax = Taxonomy::build(&[(0, 0, 0), (1, 0, 0)]).unwrap();
        let d = dataset(vec![0, 0], &[0, 1]);
        let e = ckl_expand(&d, &tax, Level::Genus).unwrap();
        let got: Vec<(usize, usize)> = e.pairs.iter().map(|p| (p.sample, p.semantic_source)).collect();
        assert_eq!(got, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn singleton_genus_adds_nothing() {
        let tax = Taxonomy::build(&[(0, 0, 0), (1, 1, 0)]).unwrap();
        let d = dataset(vec![1], &[0, 1]);
        let e = ckl_expand(&d, &tax, Level::Genus).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.pairs[0].semantic_source, 1);
    }

    #[test]
    fn classes_without_semantics_are_skipped() {
        let tax = Taxonomy::build(&[(0, 0, 0), (1, 0, 0), (2, 0, 0)]).unwrap();
        let d = dataset(vec![0], &[0, 2]);
        let e = ckl_expand(&d, &tax, Level::Genus).unwrap();
        let src: Vec<usize> = e.pairs.iter().map(|p| p.semantic_source).collect();
        assert_eq!(src, vec![0, 2]);
    }

    #[test]
    fn unknown_species_is_an_error() {
        let tax = Taxonomy::build(&[(0, 0, 0)]).unwrap();
        let d = dataset(vec![3], &[3]);
        assert!(matches!(
            ckl_expand(&d, &tax, Level::Genus),
            Err(Error::UnknownSpecies(3))
        ));
    }

    #[test]
    fn pair_counts_nest_across_levels() {
        let recs: Vec<(usize, usize, usize)> = (0..12).map(|s| (s, s / 2, s / 4)).collect();
        let tax = Taxonomy::build(&recs).unwrap();
        let spec = SynthSpec {
            per_class: 3,
            ..SynthSpec::default()
        };
        let mut rng = SeededRng::new(2);
        let full = synth_dataset(&tax, &spec, 4).unwrap();
        let mut classes: Vec<usize> = (0..12).collect();
        rng.shuffle(&mut classes);
        let d = full.restrict(&classes[..8]);
        let n = [Level::Species, Level::Genus, Level::Family]
            .map(|l| ckl_expand(&d, &tax, l).unwrap().len());
        assert_eq!(n[0], d.len());
        assert!(n[0] <= n[1] && n[1] <= n[2]);
    }
}
