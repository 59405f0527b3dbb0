//! Per-class accuracy, harmonic mean and the seen-unseen accuracy curve.

use std::collections::BTreeMap;

use super::bank::SynthesizedBank;
use super::knn::{classify_all, Prediction};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::taxonomy::SpeciesId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassAccuracy {
    pub class: SpeciesId,
    pub correct: usize,
    pub total: usize,
}

impl ClassAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Accuracy of every class in `classes` over `(true, predicted)` pairs.
pub fn per_class_accuracy(
    preds: &[(SpeciesId, SpeciesId)],
    classes: &[SpeciesId],
) -> Result<Vec<ClassAccuracy>> {
    let mut table: BTreeMap<SpeciesId, (usize, usize)> =
        classes.iter().map(|&c| (c, (0, 0))).collect();
    for &(truth, guess) in preds {
        let slot = table.get_mut(&truth).ok_or(Error::UnknownClass(truth))?;
        slot.1 += 1;
        if truth == guess {
            slot.0 += 1;
        }
    }
    table
        .into_iter()
        .map(|(class, (correct, total))| {
            if total == 0 {
                Err(Error::MissingClass(class))
            } else {
                Ok(ClassAccuracy {
                    class,
                    correct,
                    total,
                })
            }
        })
        .collect()
}

/// Mean over classes of per-class accuracy; every class counts equally.
pub fn top1_per_class(preds: &[(SpeciesId, SpeciesId)], classes: &[SpeciesId]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let table = per_class_accuracy(preds, classes)?;
    Ok(table.iter().map(ClassAccuracy::accuracy).sum::<f64>() / table.len() as f64)
}

/// `2US / (U + S)` in the units of the inputs.
pub fn harmonic_mean(u: f64, s: f64) -> Result<f64> {
    if !(u.is_finite() && s.is_finite()) || u < 0.0 || s < 0.0 || u + s == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "harmonic mean needs non-negative accuracies with a positive sum, got U={u}, S={s}"
        )));
    }
    Ok(2.0 * u * s / (u + s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SucPoint {
    pub offset: f64,
    pub seen: f64,
    pub unseen: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SucCurve {
    /// Ascending in offset, from `-inf` to `+inf`.
    pub points: Vec<SucPoint>,
    pub area: f64,
}

/// `points` offsets evenly spaced over `[-spread, spread]`, refined with one
/// offset between every pair of adjacent decision thresholds.
///
/// A query switches between its best seen and best unseen class exactly when
/// the offset crosses the gap between their scores; `spread` is the widest
/// such gap. With a point inside every interval between thresholds the
/// traced curve is exact, which an even grid alone cannot promise when two
/// queries flip inside one cell. `classes` is the bank's class order and
/// `seen` the seen subset.
pub fn calibration_grid<'a>(
    classes: &[SpeciesId],
    seen: &[SpeciesId],
    predictions: impl IntoIterator<Item = &'a Prediction>,
    points: usize,
) -> Vec<f64> {
    let is_seen: Vec<bool> = classes.iter().map(|c| seen.contains(c)).collect();
    let mut thresholds: Vec<f64> = predictions
        .into_iter()
        .filter(|p| p.scores.len() == classes.len())
        .filter_map(|p| {
            let q = Split::new(0, p, classes, &is_seen);
            Some(q.unseen?.0 - q.seen?.0)
        })
        .filter(|t| t.is_finite())
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let spread = thresholds.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let spread = if spread > 0.0 { spread } else { 1.0 };
    let mut grid: Vec<f64> = match points {
        0 => return Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| -spread + 2.0 * spread * i as f64 / (points - 1) as f64)
            .collect(),
    };
    grid.extend(thresholds.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Best seen and best unseen candidate of one query, ties to the smaller id.
#[derive(Debug, Clone, Copy)]
struct Split {
    truth: SpeciesId,
    seen: Option<(f64, SpeciesId)>,
    unseen: Option<(f64, SpeciesId)>,
}

impl Split {
    fn new(truth: SpeciesId, p: &Prediction, classes: &[SpeciesId], is_seen: &[bool]) -> Self {
        let mut out = Self {
            truth,
            seen: None,
            unseen: None,
        };
        for (j, (&c, &s)) in classes.iter().zip(&p.scores).enumerate() {
            let best = if is_seen[j] {
                &mut out.seen
            } else {
                &mut out.unseen
            };
            // classes ascend, so strict > keeps the smaller id on ties
            if best.is_none_or(|(b, _)| s > b) {
                *best = Some((s, c));
            }
        }
        out
    }

    fn predict(&self, offset: f64) -> SpeciesId {
        match (self.seen, self.unseen) {
            (Some((s, cs)), Some((u, cu))) => {
                let s = s + offset;
                if s > u || (s == u && cs < cu) {
                    cs
                } else {
                    cu
                }
            }
            (Some((_, c)), None) | (None, Some((_, c))) => c,
            (None, None) => unreachable!("bank has classes"),
        }
    }
}

/// Seen-unseen curve from per-query class scores.
///
/// Seen classes are the labels of `seen`; the offset is added to their
/// scores. Accuracies are per-class means; the curve is closed with the
/// `-inf` and `+inf` offsets and integrated with the trapezoid rule in
/// (seen accuracy, unseen accuracy) space.
pub fn ausuc_from_predictions(
    classes: &[SpeciesId],
    seen: (&[SpeciesId], &[Prediction]),
    unseen: (&[SpeciesId], &[Prediction]),
    grid: &[f64],
) -> Result<SucCurve> {
    if classes.is_empty() {
        return Err(Error::EmptyBank);
    }
    if seen.0.is_empty() || unseen.0.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    if seen.0.len() != seen.1.len() || unseen.0.len() != unseen.1.len() {
        return Err(Error::ShapeMismatch("labels and predictions differ in length".into()));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) || grid.iter().any(|g| g.is_nan())
    {
        return Err(Error::InvalidConfig("calibration grid must be non-empty and sorted".into()));
    }
    let distinct = |labels: &[SpeciesId]| {
        let mut v = labels.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let seen_classes = distinct(seen.0);
    let unseen_classes = distinct(unseen.0);
    if let Some(c) = seen_classes.iter().find(|c| unseen_classes.contains(c)) {
        return Err(Error::InvalidConfig(format!(
            "class {c} has both seen and unseen queries"
        )));
    }
    for &c in seen_classes.iter().chain(&unseen_classes) {
        if classes.binary_search(&c).is_err() {
            return Err(Error::MissingClass(c));
        }
    }
    let is_seen: Vec<bool> = classes
        .iter()
        .map(|c| seen_classes.binary_search(c).is_ok())
        .collect();
    for p in seen.1.iter().chain(unseen.1) {
        if p.scores.len() != classes.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scores for {} classes",
                p.scores.len(),
                classes.len()
            )));
        }
    }
    let prep = |(labels, preds): (&[SpeciesId], &[Prediction])| -> Vec<Split> {
        labels
            .iter()
            .zip(preds)
            .map(|(&t, p)| Split::new(t, p, classes, &is_seen))
            .collect()
    };
    let seen_q = prep(seen);
    let unseen_q = prep(unseen);

    let accuracy = |qs: &[Split], cls: &[SpeciesId], offset: f64| -> Result<f64> {
        let pairs: Vec<_> = qs.iter().map(|q| (q.truth, q.predict(offset))).collect();
        top1_per_class(&pairs, cls)
    };
    let mut offsets = Vec::with_capacity(grid.len() + 2);
    offsets.push(f64::NEG_INFINITY);
    offsets.extend_from_slice(grid);
    offsets.push(f64::INFINITY);
    let points = offsets
        .into_iter()
        .map(|offset| {
            Ok(SucPoint {
                offset,
                seen: accuracy(&seen_q, &seen_classes, offset)?,
                unseen: accuracy(&unseen_q, &unseen_classes, offset)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let area = points
        .windows(2)
        .map(|w| (w[1].seen - w[0].seen) * (w[0].unseen + w[1].unseen) / 2.0)
        .sum();
    Ok(SucCurve { points, area })
}

/// Classifies both query sets against `bank` (k = 1 scores) and traces the
/// curve over `grid`, or over [`calibration_grid`] with `grid_points`
/// offsets when `grid` is `None`.
pub fn ausuc(
    bank: &SynthesizedBank,
    seen: (&Tensor, &[SpeciesId]),
    unseen: (&Tensor, &[SpeciesId]),
    grid: Option<&[f64]>,
    grid_points: usize,
) -> Result<SucCurve> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if seen.0.rows() == 0 || unseen.0.rows() == 0 {
        return Err(Error::EmptyQuerySet);
    }
    let seen_preds = classify_all(bank, seen.0, 1)?;
    let unseen_preds = classify_all(bank, unseen.0, 1)?;
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            let mut seen_classes = seen.1.to_vec();
            seen_classes.sort_unstable();
            seen_classes.dedup();
            owned = calibration_grid(
                bank.classes(),
                &seen_classes,
                seen_preds.iter().chain(&unseen_preds),
                grid_points,
            );
            &owned
        }
    };
    ausuc_from_predictions(
        bank.classes(),
        (seen.1, &seen_preds),
        (unseen.1, &unseen_preds),
        grid,
    )
}
