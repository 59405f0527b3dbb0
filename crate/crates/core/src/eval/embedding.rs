//! Low-dimensional PCA projection for plotting real against synthesized features.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::table::{join_reals, write_table};
use crate::taxonomy::SpeciesId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Real,
    Synth,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Real => "real",
            FeatureKind::Synth => "synth",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub label: SpeciesId,
    pub kind: FeatureKind,
    pub coords: Vec<f64>,
}

/// Projects rows onto the top `dims` principal components.
///
/// Components are ordered by decreasing variance; each is signed so that its
/// largest-magnitude entry is positive, which makes the output deterministic.
pub fn export_embedding(
    features: &Tensor,
    labels: &[SpeciesId],
    kinds: &[FeatureKind],
    dims: usize,
) -> Result<Vec<EmbeddingRow>> {
    let (n, v) = features.shape();
    if labels.len() != n || kinds.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} feature rows, {} labels, {} kinds",
            labels.len(),
            kinds.len()
        )));
    }
    if dims == 0 || n < dims + 1 || dims > v {
        return Err(Error::DegenerateCovariance(format!(
            "{n} samples of dimension {v} cannot give {dims} components"
        )));
    }
    let x = DMatrix::from_row_slice(n, v, features.as_slice());
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, v, |r, c| x[(r, c)] - mean[c]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    if cov.trace() <= 0.0 {
        return Err(Error::DegenerateCovariance("features have zero variance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order[..dims]
        .iter()
        .map(|&j| {
            let col: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
            if pivot < 0.0 {
                col.iter().map(|e| -e).collect()
            } else {
                col
            }
        })
        .collect();
    Ok((0..n)
        .map(|r| EmbeddingRow {
            label: labels[r],
            kind: kinds[r],
            coords: axes
                .iter()
                .map(|a| centered.row(r).iter().zip(a).map(|(x, e)| x * e).sum())
                .collect(),
        })
        .collect())
}

/// `label,kind,pc1,pc2,...`
pub fn write_embedding(path: &Path, rows: &[EmbeddingRow]) -> Result<()> {
    let dims = rows.first().map_or(2, |r| r.coords.len());
    let header = std::iter::once("label,kind".to_string())
        .chain((1..=dims).map(|i| format!("pc{i}")))
        .collect::<Vec<_>>()
        .join(",");
    write_table(
        path,
        &header,
        rows.iter()
            .map(|r| format!("{},{},{}", r.label, r.kind, join_reals(&r.coords))),
    )
}
