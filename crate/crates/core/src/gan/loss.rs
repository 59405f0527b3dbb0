//! Loss terms and their gradients with respect to their direct inputs.

use serde::{Deserialize, Serialize};

use super::model::Discriminator;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::taxonomy::Level;

/// Weights of the species, genus and family regularisation terms. Each lies in
/// `[0, 1]` and they sum to one within `1e-9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrWeights", into = "RawTrWeights")]
pub struct TrWeights {
    species: f64,
    genus: f64,
    family: f64,
}

/// Missing weights take their default, so a partial table still hits the
/// sum check rather than a missing-field error.
#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTrWeights {
    species: f64,
    genus: f64,
    family: f64,
}

impl TryFrom<RawTrWeights> for TrWeights {
    type Error = Error;

    fn try_from(r: RawTrWeights) -> Result<Self> {
        TrWeights::new(r.species, r.genus, r.family)
    }
}

impl From<TrWeights> for RawTrWeights {
    fn from(w: TrWeights) -> Self {
        RawTrWeights {
            species: w.species,
            genus: w.genus,
            family: w.family,
        }
    }
}

impl Default for RawTrWeights {
    fn default() -> Self {
        TrWeights::default().into()
    }
}

impl TrWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(species: f64, genus: f64, family: f64) -> Result<Self> {
        let sum = species + genus + family;
        let in_range = [species, genus, family]
            .iter()
            .all(|w| w.is_finite() && (0.0..=1.0).contains(w));
        if !in_range || (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::WeightConstraintViolated {
                species,
                genus,
                family,
                sum,
            });
        }
        Ok(Self {
            species,
            genus,
            family,
        })
    }

    pub fn species_only() -> Self {
        Self {
            species: 1.0,
            genus: 0.0,
            family: 0.0,
        }
    }

    pub fn get(&self, level: Level) -> f64 {
        match level {
            Level::Species => self.species,
            Level::Genus => self.genus,
            Level::Family => self.family,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.species, self.genus, self.family]
    }
}

impl Default for TrWeights {
    fn default() -> Self {
        Self {
            species: 0.6,
            genus: 0.2,
            family: 0.2,
        }
    }
}

/// `(1/N) sum_i |output_i - center_i|^2`.
pub fn tr_term(outputs: &Tensor, centers: &Tensor) -> Result<f64> {
    Ok(tr_term_with_grad(outputs, centers)?.0)
}

pub fn tr_term_with_grad(outputs: &Tensor, centers: &Tensor) -> Result<(f64, Tensor)> {
    if outputs.shape() != centers.shape() || outputs.rows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "regulariser batch {:?} against centers {:?}",
            outputs.shape(),
            centers.shape()
        )));
    }
    let n = outputs.rows() as f64;
    let diff = outputs.zip_map(centers, |o, c| o - c)?;
    let value = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.map(|d| 2.0 * d / n);
    Ok((value, grad))
}

/// Weighted sum of the three level terms.
pub fn tr_loss(species: f64, genus: f64, family: f64, w: &TrWeights) -> f64 {
    w.species * species + w.genus * genus + w.family * family
}

/// Mean softmax cross-entropy; `labels` are column indices into `logits`.
pub fn classification_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    Ok(classification_loss_with_grad(logits, labels)?.0)
}

pub fn classification_loss_with_grad(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.rows() != labels.len() || logits.rows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let n = logits.rows() as f64;
    let mut grad = Tensor::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= logits.cols() {
            return Err(Error::UnknownLabel {
                label: y,
                path: None,
                line: None,
            });
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[y];
        let g = grad.row_mut(r);
        for (gi, v) in g.iter_mut().zip(row) {
            *gi = (v - log_z).exp() / n;
        }
        g[y] -= 1.0 / n;
    }
    Ok((total / n, grad))
}

/// `-mean(critic(fake)) + cls_weight * CE(class_head(fake), labels) + tr`.
pub fn generator_loss(
    d: &Discriminator,
    fake: &Tensor,
    labels: &[usize],
    tr: f64,
    cls_weight: f64,
) -> Result<f64> {
    let fwd = d.forward(fake)?;
    let wass = -fwd.realness.sum() / fake.rows() as f64;
    let cls = if cls_weight != 0.0 {
        cls_weight * classification_loss(&fwd.logits, labels)?
    } else {
        0.0
    };
    Ok(wass + cls + tr)
}

/// `mean_i (|grad_x critic(x_i)| - 1)^2` over the rows of `points`, with its
/// gradient with respect to the discriminator parameters.
pub fn gradient_penalty(d: &Discriminator, points: &Tensor) -> Result<(f64, Discriminator)> {
    let n = points.rows();
    if n == 0 {
        return Err(Error::ShapeMismatch("empty gradient-penalty batch".into()));
    }
    let fwd = d.forward(points)?;
    let ig = d.realness_input_gradient(&fwd)?;
    let mut u_bar = Tensor::zeros(n, points.cols());
    let mut value = 0.0;
    for r in 0..n {
        let u = ig.value.row(r);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        value += (norm - 1.0) * (norm - 1.0);
        if norm > 0.0 {
            let scale = 2.0 * (norm - 1.0) / (norm * n as f64);
            for (b, x) in u_bar.row_mut(r).iter_mut().zip(u) {
                *b = scale * x;
            }
        }
    }
    let grads = d.realness_input_gradient_backward(&fwd, &ig, &u_bar)?;
    Ok((value / n as f64, grads))
}

/// Row-wise `alpha_i * real_i + (1 - alpha_i) * fake_i`.
pub fn interpolate(real: &Tensor, fake: &Tensor, alphas: &[f64]) -> Result<Tensor> {
    if real.shape() != fake.shape() || alphas.len() != real.rows() {
        return Err(Error::ShapeMismatch(format!(
            "interpolating {:?} and {:?} with {} coefficients",
            real.shape(),
            fake.shape(),
            alphas.len()
        )));
    }
    let mut out = real.clone();
    for (r, &a) in alphas.iter().enumerate() {
        for (o, f) in out.row_mut(r).iter_mut().zip(fake.row(r)) {
            *o = a * *o + (1.0 - a) * f;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, Layer, MlpParams, SeededRng};

    fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Tensor {
        Tensor::from_vec(rows, cols, rng.normal_vec(rows * cols)).unwrap()
    }

    #[test]
    fn tr_term_examples() {
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(tr_term(&a, &a).unwrap(), 0.0);
        let o = Tensor::from_rows(&[[0.0, 0.0]]).unwrap();
        let c = Tensor::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(tr_term(&o, &c).unwrap(), 1.0);
        assert!(tr_term(&o, &a).is_err());
    }

    #[test]
    fn tr_term_matches_scalar_loop() {
        let mut rng = SeededRng::new(4);
        let o = random(7, 5, &mut rng);
        let c = random(7, 5, &mut rng);
        let mut acc = 0.0;
        for i in 0..7 {
            let mut row = 0.0;
            for j in 0..5 {
                let d = o.get(i, j) - c.get(i, j);
                row += d * d;
            }
            acc += row;
        }
        assert!((tr_term(&o, &c).unwrap() - acc / 7.0).abs() < 1e-12);
    }

    #[test]
    fn tr_term_is_order_invariant() {
        let mut rng = SeededRng::new(5);
        let o = random(6, 3, &mut rng);
        let c = random(6, 3, &mut rng);
        let perm = [3, 0, 5, 1, 4, 2];
        let a = tr_term(&o, &c).unwrap();
        let b = tr_term(&o.select_rows(&perm), &c.select_rows(&perm)).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn tr_loss_examples() {
        assert_eq!(tr_loss(2.5, 7.0, 9.0, &TrWeights::species_only()), 2.5);
        let third = 1.0 / 3.0;
        let w = TrWeights::new(third, third, third).unwrap();
        assert!((tr_loss(3.0, 6.0, 9.0, &w) - 6.0).abs() < 1e-12);
        assert!(matches!(
            TrWeights::new(0.5, 0.3, 0.3),
            Err(Error::WeightConstraintViolated { .. })
        ));
        assert!(TrWeights::new(1.2, -0.1, -0.1).is_err());
    }

    #[test]
    fn tr_loss_is_linear_in_terms() {
        let w = TrWeights::default();
        for a in [0.0, 0.5, 2.0, 10.0] {
            let base = tr_loss(1.0, 2.0, 3.0, &w);
            assert!((tr_loss(a, 2.0 * a, 3.0 * a, &w) - a * base).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_deserialize_with_validation() {
        let ok: TrWeights =
            serde_json::from_str(r#"{"species":0.6,"genus":0.2,"family":0.2}"#).unwrap();
        assert_eq!(ok, TrWeights::default());
        assert!(serde_json::from_str::<TrWeights>(r#"{"species":0.6,"genus":0.3,"family":0.2}"#).is_err());
    }

    #[test]
    fn cross_entropy_limits() {
        let c = 5;
        let uniform = Tensor::zeros(3, c);
        let l = classification_loss(&uniform, &[0, 2, 4]).unwrap();
        assert!((l - (c as f64).ln()).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 60.0] {
            let mut t = Tensor::zeros(1, 3);
            t.set(0, 1, margin);
            let l = classification_loss(&t, &[1]).unwrap();
            assert!(l < last);
            last = l;
        }
        assert!(last < 1e-20);
        assert!(matches!(
            classification_loss(&uniform, &[0, 1, 9]),
            Err(Error::UnknownLabel { label: 9, .. })
        ));
    }

    #[test]
    fn cross_entropy_matches_direct_formula() {
        let mut rng = SeededRng::new(8);
        let logits = random(6, 4, &mut rng);
        let labels = [0, 3, 1, 1, 2, 0];
        let mut acc = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = logits.row(r);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            acc += -(row[y].exp() / z).ln();
        }
        let got = classification_loss(&logits, &labels).unwrap();
        assert!((got - acc / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unit_linear_critic_has_zero_penalty() {
        // Identity trunk and a unit realness vector: |grad| = 1 everywhere.
        let mut trunk = MlpParams::new(&[3, 3], Activation::Identity, Activation::Identity).unwrap();
        trunk.layers[0].weight = Tensor::identity(3);
        let mut realness = Layer::zeros(3, 1, Activation::Identity);
        realness.weight = Tensor::from_rows(&[[0.6, 0.0, 0.8]]).unwrap();
        let d = Discriminator::from_parts(trunk, realness, Layer::zeros(3, 2, Activation::Identity)).unwrap();
        let mut rng = SeededRng::new(1);
        let pts = random(10, 3, &mut rng);
        let (p, g) = gradient_penalty(&d, &pts).unwrap();
        assert!(p.abs() < 1e-24);
        assert!(g.to_flat().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn interpolation_endpoints() {
        let r = Tensor::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        let f = Tensor::from_rows(&[[3.0, 3.0], [4.0, 4.0]]).unwrap();
        let x = interpolate(&r, &f, &[1.0, 0.0]).unwrap();
        assert_eq!(x.row(0), r.row(0));
        assert_eq!(x.row(1), f.row(1));
    }
}
