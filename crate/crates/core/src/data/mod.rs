//! Labelled (visual, semantic) datasets and the derived training views.

mod centers;
mod ckl;
mod synth;
mod tfidf;

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{SeededRng, Tensor};
use crate::table::{join_reals, write_table, Table};
use crate::taxonomy::{SpeciesId, Taxonomy};

pub use centers::{compute_centers, Center, CenterTable};
pub use ckl::{ckl_expand, CklDataset, CklPair};
pub use synth::{synth_dataset, SynthSpec};
pub use tfidf::{read_corpus, tfidf_featurize, tokenize, write_semantics, TfIdf};

/// Visual features (one row per sample), labels, and one semantic vector per
/// class. A sample's semantic feature is always its class's vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    visual: Tensor,
    labels: Vec<SpeciesId>,
    semantics: BTreeMap<SpeciesId, Vec<f64>>,
    semantic_dim: usize,
}

impl Dataset {
    pub fn new(
        visual: Tensor,
        labels: Vec<SpeciesId>,
        semantics: BTreeMap<SpeciesId, Vec<f64>>,
    ) -> Result<Self> {
        if visual.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} visual rows but {} labels",
                visual.rows(),
                labels.len()
            )));
        }
        visual.ensure_finite("visual features")?;
        let semantic_dim = semantics.values().next().map(Vec::len).unwrap_or(0);
        for (c, t) in &semantics {
            if t.len() != semantic_dim {
                return Err(Error::DimensionMismatch(format!(
                    "semantic vector of class {c} has {} entries, expected {semantic_dim}",
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("semantic vector of class {c}")));
            }
        }
        if let Some(&y) = labels.iter().find(|y| !semantics.contains_key(y)) {
            return Err(Error::DimensionMismatch(format!(
                "class {y} has samples but no semantic vector"
            )));
        }
        Ok(Self {
            visual,
            labels,
            semantics,
            semantic_dim,
        })
    }

    /// Rejects labels or semantic classes absent from `tax`.
    pub fn validate_against(&self, tax: &Taxonomy) -> Result<()> {
        if let Some(&y) = self
            .labels
            .iter()
            .chain(self.semantics.keys())
            .find(|&&y| !tax.contains(y))
        {
            return Err(Error::UnknownLabel {
                label: y,
                path: None,
                line: None,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn visual_dim(&self) -> usize {
        self.visual.cols()
    }

    pub fn semantic_dim(&self) -> usize {
        self.semantic_dim
    }

    pub fn visual(&self) -> &Tensor {
        &self.visual
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.visual.row(i)
    }

    pub fn label(&self, i: usize) -> SpeciesId {
        self.labels[i]
    }

    pub fn labels(&self) -> &[SpeciesId] {
        &self.labels
    }

    pub fn semantics(&self) -> &BTreeMap<SpeciesId, Vec<f64>> {
        &self.semantics
    }

    pub fn semantic(&self, y: SpeciesId) -> Option<&[f64]> {
        self.semantics.get(&y).map(Vec::as_slice)
    }

    /// Classes with at least one sample, ascending.
    pub fn classes(&self) -> Vec<SpeciesId> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn indices_of(&self, y: SpeciesId) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == y).collect()
    }

    /// Samples and semantic vectors of the given classes only, order kept.
    pub fn restrict(&self, classes: &[SpeciesId]) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        self.subset_with(&keep, |c| classes.contains(&c))
    }

    /// The given sample rows, keeping semantics of the classes that remain.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let classes: Vec<SpeciesId> = rows.iter().map(|&i| self.labels[i]).collect();
        self.subset_with(rows, |c| classes.contains(&c))
    }

    fn subset_with(&self, rows: &[usize], keep_class: impl Fn(SpeciesId) -> bool) -> Self {
        Self {
            visual: self.visual.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            semantics: self
                .semantics
                .iter()
                .filter(|(c, _)| keep_class(**c))
                .map(|(c, t)| (*c, t.clone()))
                .collect(),
            semantic_dim: self.semantic_dim,
        }
    }

    /// Per class, holds out `floor(fraction * n_c)` samples (at least one when
    /// `n_c >= 2` and `fraction > 0`) into the second dataset.
    pub fn holdout_per_class(&self, fraction: f64, rng: &mut SeededRng) -> (Self, Self) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in self.classes() {
            let mut idx = self.indices_of(c);
            rng.shuffle(&mut idx);
            let n = idx.len();
            let mut k = (fraction * n as f64).floor() as usize;
            if fraction > 0.0 && n >= 2 {
                k = k.clamp(1, n - 1);
            }
            test.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        let all = |_c: SpeciesId| true;
        (self.subset_with(&train, all), self.subset_with(&test, all))
    }

    /// Reads `label,v_0,...` and `species_id,s_0,...` files and checks every
    /// label against `tax`.
    pub fn load(visual_path: &Path, semantic_path: &Path, tax: &Taxonomy) -> Result<Self> {
        let semantics = read_semantics(semantic_path, tax)?;
        let table = Table::read(visual_path)?;
        let mut labels = Vec::with_capacity(table.rows.len());
        let mut values = Vec::new();
        let mut width = None;
        for row in &table.rows {
            let y = table.usize_field(row, 0)?;
            if !tax.contains(y) {
                return Err(Error::UnknownLabel {
                    label: y,
                    path: Some(visual_path.to_path_buf()),
                    line: Some(row.line),
                });
            }
            if !semantics.contains_key(&y) {
                return Err(Error::DimensionMismatch(format!(
                    "{}:{}: class {y} has no row in {}",
                    visual_path.display(),
                    row.line,
                    semantic_path.display()
                )));
            }
            let x = table.real_fields(row, 1)?;
            match width {
                None => width = Some(x.len()),
                Some(w) if w != x.len() => {
                    return Err(Error::DimensionMismatch(format!(
                        "{}:{}: {} visual values, expected {w}",
                        visual_path.display(),
                        row.line,
                        x.len()
                    )))
                }
                _ => {}
            }
            labels.push(y);
            values.extend(x);
        }
        let visual = Tensor::from_vec(labels.len(), width.unwrap_or(0), values)?;
        Dataset::new(visual, labels, semantics)
    }

    pub fn write(&self, visual_path: &Path, semantic_path: &Path) -> Result<()> {
        let header = std::iter::once("label".to_string())
            .chain((0..self.visual_dim()).map(|i| format!("v_{i}")))
            .collect::<Vec<_>>()
            .join(",");
        let rows = (0..self.len()).map(|i| format!("{},{}", self.labels[i], join_reals(self.x(i))));
        write_table(visual_path, &header, rows)?;
        write_semantics(semantic_path, &self.semantics)
    }
}

/// Reads `species_id,s_0,...`.
pub fn read_semantics(path: &Path, tax: &Taxonomy) -> Result<BTreeMap<SpeciesId, Vec<f64>>> {
    let table = Table::read(path)?;
    let mut out = BTreeMap::new();
    let mut width = None;
    for row in &table.rows {
        let y = table.usize_field(row, 0)?;
        if !tax.contains(y) {
            return Err(Error::UnknownLabel {
                label: y,
                path: Some(path.to_path_buf()),
                line: Some(row.line),
            });
        }
        let t = table.real_fields(row, 1)?;
        match width {
            None => width = Some(t.len()),
            Some(w) if w != t.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "{}:{}: {} semantic values, expected {w}",
                    path.display(),
                    row.line,
                    t.len()
                )))
            }
            _ => {}
        }
        if out.insert(y, t).is_some() {
            return Err(table.parse_error(row.line, format!("class {y} listed twice")));
        }
    }
    Ok(out)
}
