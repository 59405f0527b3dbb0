use std::collections::BTreeMap;

use super::Dataset;
use crate::error::{Error, Result};
use crate::taxonomy::{Level, SpeciesId, Taxonomy};

#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub mean: Vec<f64>,
    pub count: usize,
}

/// Mean visual feature of every species, genus and family that has samples.
/// Genus and family means run over samples, not over species means.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterTable {
    species: BTreeMap<usize, Center>,
    genus: BTreeMap<usize, Center>,
    family: BTreeMap<usize, Center>,
}

impl CenterTable {
    fn level(&self, level: Level) -> &BTreeMap<usize, Center> {
        match level {
            Level::Species => &self.species,
            Level::Genus => &self.genus,
            Level::Family => &self.family,
        }
    }

    /// Center of a node id at `level`.
    pub fn get(&self, level: Level, node: usize) -> Option<&Center> {
        self.level(level).get(&node)
    }

    /// Center of the node containing species `y` at `level`.
    pub fn for_species(&self, tax: &Taxonomy, y: SpeciesId, level: Level) -> Result<&[f64]> {
        let node = tax.node_of(y, level)?;
        self.get(level, node)
            .map(|c| c.mean.as_slice())
            .ok_or_else(|| Error::EmptyNode(format!("{level} {node} (via species {y})")))
    }

    pub fn nodes(&self, level: Level) -> impl Iterator<Item = (usize, &Center)> {
        self.level(level).iter().map(|(k, v)| (*k, v))
    }
}

pub fn compute_centers(d: &Dataset, tax: &Taxonomy) -> Result<CenterTable> {
    if d.is_empty() {
        return Err(Error::EmptyInput("dataset for center computation"));
    }
    let dim = d.visual_dim();
    let mut sums: [BTreeMap<usize, (Vec<f64>, usize)>; 3] = Default::default();
    for (i, &y) in d.labels().iter().enumerate() {
        for (slot, level) in Level::ALL.into_iter().enumerate() {
            let node = tax.node_of(y, level)?;
            let (sum, n) = sums[slot]
                .entry(node)
                .or_insert_with(|| (vec![0.0; dim], 0));
            for (s, x) in sum.iter_mut().zip(d.x(i)) {
                *s += x;
            }
            *n += 1;
        }
    }
    let [species, genus, family] = sums.map(|m| {
        m.into_iter()
            .map(|(k, (sum, n))| {
                let mean = sum.into_iter().map(|s| s / n as f64).collect();
                (k, Center { mean, count: n })
            })
            .collect()
    });
    Ok(CenterTable {
        species,
        genus,
        family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthSpec};
    use crate::numerics::Tensor;

    fn ds(rows: &[[f64; 2]], labels: Vec<usize>, classes: &[usize]) -> Dataset {
        let sem = classes.iter().map(|&c| (c, vec![0.0])).collect();
        Dataset::new(Tensor::from_rows(rows).unwrap(), labels, sem).unwrap()
    }

    #[test]
    fn single_sample_is_every_center() {
        let tax = Taxonomy::build(&[(0, 0, 0)]).unwrap();
        let c = compute_centers(&ds(&[[1.0, 0.0]], vec![0], &[0]), &tax).unwrap();
        for level in Level::ALL {
            assert_eq!(c.for_species(&tax, 0, level).unwrap(), &[1.0, 0.0]);
        }
    }

    #[test]
    fn genus_center_averages_samples() {
        let tax = Taxonomy::build(&[(0, 0, 0), (1, 0, 0)]).unwrap();
        let d = ds(&[[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]], vec![0, 0, 1], &[0, 1]);
        let c = compute_centers(&d, &tax).unwrap();
        let g = c.for_species(&tax, 1, Level::Genus).unwrap();
        assert!((g[0] - 2.0 / 3.0).abs() < 1e-15 && (g[1] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.get(Level::Genus, 0).unwrap().count, 3);
    }

    #[test]
    fn genus_center_is_count_weighted_species_mean() {
        let recs: Vec<(usize, usize, usize)> = (0..6).map(|s| (s, s / 3, 0)).collect();
        let tax = Taxonomy::build(&recs).unwrap();
        let d = synth_dataset(&tax, &SynthSpec::default(), 3).unwrap();
        let d = d.subset(&(0..d.len()).filter(|i| i % 7 != 0).collect::<Vec<_>>());
        let c = compute_centers(&d, &tax).unwrap();
        for g in tax.genera() {
            let mut acc = vec![0.0; d.visual_dim()];
            let mut total = 0;
            for &s in tax.species_in_genus(g) {
                let sc = c.get(Level::Species, s).unwrap();
                for (a, m) in acc.iter_mut().zip(&sc.mean) {
                    *a += m * sc.count as f64;
                }
                total += sc.count;
            }
            let gc = c.get(Level::Genus, g).unwrap();
            assert_eq!(gc.count, total);
            for (a, m) in acc.iter().zip(&gc.mean) {
                assert!((a / total as f64 - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_node_is_reported() {
        let tax = Taxonomy::build(&[(0, 0, 0), (1, 1, 0)]).unwrap();
        let c = compute_centers(&ds(&[[1.0, 1.0]], vec![0], &[0]), &tax).unwrap();
        assert!(matches!(
            c.for_species(&tax, 1, Level::Genus),
            Err(Error::EmptyNode(_))
        ));
        assert!(c.for_species(&tax, 1, Level::Family).is_ok());
    }
}
