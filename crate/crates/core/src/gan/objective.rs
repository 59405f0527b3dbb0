//! Full generator and discriminator objectives with analytic gradients.
//!
//! Training and the gradient checker both go through these two functions, so
//! a passing gradient check covers exactly the gradients used for updates.

use super::loss::{
    classification_loss_with_grad, gradient_penalty, interpolate, tr_term_with_grad,
};
use super::model::{Discriminator, Generator};
use crate::error::{Error, Result};
use crate::numerics::{MlpParams, Tensor};

/// Generator inputs for one taxonomy level with the row-aligned center targets.
#[derive(Debug, Clone)]
pub struct LevelBatch {
    pub semantics: Tensor,
    pub noise: Tensor,
    pub centers: Tensor,
}

#[derive(Debug, Clone)]
pub struct GeneratorBatch {
    /// Species-level pairs; drive the critic and classification terms and the
    /// species regulariser.
    pub species: LevelBatch,
    /// Class indices (discriminator head columns) of the species rows.
    pub labels: Vec<usize>,
    pub genus: Option<LevelBatch>,
    pub family: Option<LevelBatch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorWeights {
    pub wasserstein: f64,
    pub classification: f64,
    /// Species, genus, family.
    pub regularizer: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    pub total: f64,
    /// `-mean(critic(fake))`
    pub wasserstein: f64,
    pub classification: f64,
    /// Unweighted species, genus and family terms (0 when not evaluated).
    pub regularizer: [f64; 3],
    pub grads: MlpParams,
}

/// Generator loss and its gradient with respect to the generator only; the
/// discriminator is held fixed.
pub fn generator_objective(
    g: &Generator,
    d: &Discriminator,
    batch: &GeneratorBatch,
    w: &GeneratorWeights,
) -> Result<GeneratorLoss> {
    let (fake, tape) = g.forward(&batch.species.semantics, &batch.species.noise)?;
    let n = fake.rows() as f64;
    let fwd = d.forward(&fake)?;
    let wasserstein = -fwd.realness.sum() / n;
    let d_realness = Tensor::filled(fake.rows(), 1, -w.wasserstein / n);
    let (classification, d_logits) = if w.classification != 0.0 {
        let (v, mut gl) = classification_loss_with_grad(&fwd.logits, &batch.labels)?;
        gl.scale(w.classification);
        (v, Some(gl))
    } else {
        (0.0, None)
    };
    let (_, mut d_fake) = d.backward(&fwd, &d_realness, d_logits.as_ref())?;

    let mut regularizer = [0.0; 3];
    let (species_tr, mut species_grad) = tr_term_with_grad(&fake, &batch.species.centers)?;
    regularizer[0] = species_tr;
    species_grad.scale(w.regularizer[0]);
    d_fake.add_assign(&species_grad)?;
    let mut grads = g.backward(&tape, &d_fake)?;

    for (slot, level) in [(1, &batch.genus), (2, &batch.family)] {
        match level {
            Some(lb) => {
                let (out, tape) = g.forward(&lb.semantics, &lb.noise)?;
                let (v, mut gr) = tr_term_with_grad(&out, &lb.centers)?;
                regularizer[slot] = v;
                if w.regularizer[slot] != 0.0 {
                    gr.scale(w.regularizer[slot]);
                    grads.add_assign(&g.backward(&tape, &gr)?)?;
                }
            }
            None if w.regularizer[slot] != 0.0 => {
                return Err(Error::ShapeMismatch(format!(
                    "regulariser term {slot} is weighted but has no batch"
                )))
            }
            None => {}
        }
    }

    let total = w.wasserstein * wasserstein
        + w.classification * classification
        + regularizer
            .iter()
            .zip(&w.regularizer)
            .map(|(v, l)| v * l)
            .sum::<f64>();
    Ok(GeneratorLoss {
        total,
        wasserstein,
        classification,
        regularizer,
        grads,
    })
}

#[derive(Debug, Clone)]
pub struct DiscriminatorBatch {
    pub real: Tensor,
    pub fake: Tensor,
    /// Class indices of the real rows.
    pub labels: Vec<usize>,
    /// Interpolation coefficients for the gradient penalty, one per row.
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorWeights {
    pub wasserstein: f64,
    pub gradient_penalty: f64,
    pub classification: f64,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorLoss {
    pub total: f64,
    /// `mean(critic(fake)) - mean(critic(real))`
    pub wasserstein: f64,
    pub gradient_penalty: f64,
    /// Cross-entropy of the class head on real rows.
    pub classification: f64,
    pub grads: Discriminator,
}

pub fn discriminator_objective(
    d: &Discriminator,
    batch: &DiscriminatorBatch,
    w: &DiscriminatorWeights,
) -> Result<DiscriminatorLoss> {
    if batch.real.cols() != batch.fake.cols() {
        return Err(Error::ShapeMismatch(format!(
            "real width {} vs fake width {}",
            batch.real.cols(),
            batch.fake.cols()
        )));
    }
    let n_real = batch.real.rows() as f64;
    let n_fake = batch.fake.rows() as f64;

    let real = d.forward(&batch.real)?;
    let fake = d.forward(&batch.fake)?;
    let wasserstein = fake.realness.sum() / n_fake - real.realness.sum() / n_real;

    let (classification, d_logits) = if w.classification != 0.0 {
        let (v, mut gl) = classification_loss_with_grad(&real.logits, &batch.labels)?;
        gl.scale(w.classification);
        (v, Some(gl))
    } else {
        (0.0, None)
    };
    let d_real = Tensor::filled(batch.real.rows(), 1, -w.wasserstein / n_real);
    let (mut grads, _) = d.backward(&real, &d_real, d_logits.as_ref())?;
    let d_fake = Tensor::filled(batch.fake.rows(), 1, w.wasserstein / n_fake);
    let (fake_grads, _) = d.backward(&fake, &d_fake, None)?;
    grads.add_assign(&fake_grads)?;

    let gradient_penalty = if w.gradient_penalty != 0.0 {
        let points = interpolate(&batch.real, &batch.fake, &batch.alphas)?;
        let (gp, mut gp_grads) = gradient_penalty(d, &points)?;
        let scale = w.gradient_penalty;
        let mut flat = gp_grads.to_flat();
        flat.iter_mut().for_each(|v| *v *= scale);
        gp_grads.read_flat(&flat)?;
        grads.add_assign(&gp_grads)?;
        gp
    } else {
        0.0
    };

    let total = w.wasserstein * wasserstein
        + w.gradient_penalty * gradient_penalty
        + w.classification * classification;
    Ok(DiscriminatorLoss {
        total,
        wasserstein,
        gradient_penalty,
        classification,
        grads,
    })
}
