//! Feature banks: per-class sets of (usually synthesized) visual features.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gan::Generator;
use crate::numerics::{euclidean, SeededRng, Tensor};
use crate::taxonomy::SpeciesId;

/// Rows are grouped by class, classes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedBank {
    classes: Vec<SpeciesId>,
    features: Tensor,
    labels: Vec<SpeciesId>,
}

impl SynthesizedBank {
    pub fn new(features: Tensor, labels: Vec<SpeciesId>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} bank labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| (labels[i], i));
        let features = features.select_rows(&order);
        let labels: Vec<SpeciesId> = order.iter().map(|&i| labels[i]).collect();
        let mut classes = labels.clone();
        classes.dedup();
        Ok(Self {
            classes,
            features,
            labels,
        })
    }

    /// Real features of every class in `d`.
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        Self::new(d.visual().clone(), d.labels().to_vec())
    }

    /// Union of two banks over disjoint class sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if let Some(c) = self.classes.iter().find(|c| other.classes.contains(c)) {
            return Err(Error::InvalidConfig(format!(
                "class {c} appears in both banks being merged"
            )));
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut rows: Vec<&[f64]> = self.features.row_iter().collect();
        rows.extend(other.features.row_iter());
        if rows.is_empty() {
            return Err(Error::EmptyBank);
        }
        Self::new(Tensor::from_rows(&rows)?, labels)
    }

    pub fn classes(&self) -> &[SpeciesId] {
        &self.classes
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[SpeciesId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_index(&self, c: SpeciesId) -> Option<usize> {
        self.classes.binary_search(&c).ok()
    }

    pub fn rows_of(&self, c: SpeciesId) -> std::ops::Range<usize> {
        let start = self.labels.partition_point(|&l| l < c);
        let end = self.labels.partition_point(|&l| l <= c);
        start..end
    }

    /// Mean of the class's features.
    pub fn center(&self, c: SpeciesId) -> Result<Vec<f64>> {
        let rows = self.rows_of(c);
        if rows.is_empty() {
            return Err(Error::UnknownClass(c));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; self.dim()];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(self.features.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }

    /// Mean Euclidean distance from each feature of a class in `means` to that mean.
    pub fn mean_distance_to(&self, means: &BTreeMap<SpeciesId, Vec<f64>>) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for (&c, mu) in means {
            let rows = self.rows_of(c);
            if rows.is_empty() {
                return Err(Error::UnknownClass(c));
            }
            for r in rows {
                total += euclidean(self.features.row(r), mu);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyBank);
        }
        Ok(total / count as f64)
    }
}

/// `n` features per class of `semantics`, drawn as `G(t_c, z)`.
///
/// Each class uses its own noise stream derived from `seed` and the class id,
/// so a class's features do not depend on which other classes are present.
pub fn synthesize_bank(
    g: &Generator,
    semantics: &BTreeMap<SpeciesId, Vec<f64>>,
    n: usize,
    seed: u64,
) -> Result<SynthesizedBank> {
    if n == 0 {
        return Err(Error::InvalidConfig("synthesized count n must be at least 1".into()));
    }
    if semantics.is_empty() {
        return Err(Error::EmptyBank);
    }
    let root = SeededRng::new(seed);
    let mut rows = Vec::with_capacity(n * semantics.len());
    let mut labels = Vec::with_capacity(n * semantics.len());
    for (&c, t) in semantics {
        if t.len() != g.semantic_dim {
            return Err(Error::ShapeMismatch(format!(
                "class {c} semantic vector has {} entries, generator expects {}",
                t.len(),
                g.semantic_dim
            )));
        }
        let mut rng = root.substream(&format!("class-{c}"));
        let t_rows = Tensor::from_rows(&vec![t.as_slice(); n])?;
        let noise = g.sample_noise(n, &mut rng);
        let (out, _) = g.forward(&t_rows, &noise)?;
        rows.extend(out.row_iter().map(<[f64]>::to_vec));
        labels.extend(std::iter::repeat_n(c, n));
    }
    SynthesizedBank::new(Tensor::from_rows(&rows)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn semantics() -> BTreeMap<SpeciesId, Vec<f64>> {
        BTreeMap::from([(3, vec![1.0, 0.0]), (1, vec![0.0, 1.0])])
    }

    fn generator() -> Generator {
        let mut g = Generator::new(2, 2, &[4], 3).unwrap();
        g.net.init_normal(&mut SeededRng::new(1), 0.5);
        g
    }

    #[test]
    fn one_per_class_and_reproducible() {
        let g = generator();
        let a = synthesize_bank(&g, &semantics(), 1, 9).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.classes(), &[1, 3]);
        assert_eq!(a, synthesize_bank(&g, &semantics(), 1, 9).unwrap());
        assert_ne!(a, synthesize_bank(&g, &semantics(), 1, 10).unwrap());
    }

    #[test]
    fn class_features_do_not_depend_on_other_classes() {
        let g = generator();
        let both = synthesize_bank(&g, &semantics(), 5, 2).unwrap();
        let only = synthesize_bank(&g, &BTreeMap::from([(3, vec![1.0, 0.0])]), 5, 2).unwrap();
        assert_eq!(
            both.features().select_rows(&both.rows_of(3).collect::<Vec<_>>()),
            *only.features()
        );
    }

    #[test]
    fn zero_generator_gives_zero_features() {
        let mut g = generator();
        g.net = g.net.zeros_like();
        let b = synthesize_bank(&g, &semantics(), 4, 0).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.features().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let g = generator();
        let bad = BTreeMap::from([(0, vec![1.0])]);
        assert!(matches!(synthesize_bank(&g, &bad, 1, 0), Err(Error::ShapeMismatch(_))));
        assert!(synthesize_bank(&g, &semantics(), 0, 0).is_err());
    }

    #[test]
    fn centers_and_merge() {
        let a = SynthesizedBank::new(
            Tensor::from_rows(&[[0.0, 0.0], [2.0, 4.0]]).unwrap(),
            vec![5, 5],
        )
        .unwrap();
        assert_eq!(a.center(5).unwrap(), vec![1.0, 2.0]);
        let b = SynthesizedBank::new(Tensor::from_rows(&[[9.0, 9.0]]).unwrap(), vec![2]).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.classes(), &[2, 5]);
        assert_eq!(m.features().row(0), &[9.0, 9.0]);
        assert!(a.merge(&a).is_err());
        let d = a
            .mean_distance_to(&BTreeMap::from([(5, vec![1.0, 2.0])]))
            .unwrap();
        assert!((d - 5f64.sqrt()).abs() < 1e-12);
    }
}
