//! Analytic-versus-numeric gradient checks for every training loss term.
//!
//! Each probe isolates one term of the generator or discriminator objective
//! by zeroing the other weights, then compares the objective's analytic
//! gradient to central differences on small random networks. Cases whose
//! pre-activations sit within [`KINK_MARGIN`] of a ReLU kink are redrawn,
//! since a difference quotient straddling a kink is not a derivative.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gan::{
    discriminator_objective, generator_objective, interpolate, Discriminator, DiscriminatorBatch,
    DiscriminatorWeights, Generator, GeneratorBatch, GeneratorWeights, LevelBatch,
};
use crate::numerics::{finite_diff_grad, max_relative_error, SeededRng, Tensor};
use crate::registry::{Named, Registry};
use crate::table::write_table;

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const KINK_MARGIN: f64 = 5e-5;
/// Critic input scale for the pure Wasserstein probe. Some of its gradient
/// entries are exactly zero (equal active-unit counts on the real and fake
/// sides), where a difference quotient only sees rounding noise proportional
/// to the critic's activations. Shrinking the inputs shrinks that noise below
/// the relative-error floor.
pub const WASSERSTEIN_INPUT_SCALE: f64 = 0.01;
/// Upper bound on parameters per random network.
pub const MAX_PARAMS: usize = 2000;

/// One random instance: a generator, a discriminator and a batch for each.
#[derive(Debug, Clone)]
pub struct ProbeCase {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub generator_batch: GeneratorBatch,
    pub discriminator_batch: DiscriminatorBatch,
}

impl ProbeCase {
    /// Random shapes and weights; redraws until no pre-activation is near a kink.
    pub fn random(rng: &mut SeededRng) -> Result<Self> {
        for _ in 0..1000 {
            let case = Self::draw(rng)?;
            if case.kink_distance()? > KINK_MARGIN {
                return Ok(case);
            }
        }
        Err(Error::InvalidConfig(
            "could not draw a gradient-check case away from activation kinks".into(),
        ))
    }

    fn draw(rng: &mut SeededRng) -> Result<Self> {
        let mut pick = |lo: usize, hi: usize| lo + rng.below(hi - lo + 1);
        let (v, s, m, c) = (pick(2, 6), pick(2, 5), pick(1, 4), pick(2, 4));
        let g_hidden: Vec<usize> = (0..pick(1, 2)).map(|_| pick(3, 12)).collect();
        let d_hidden: Vec<usize> = (0..pick(1, 2)).map(|_| pick(3, 12)).collect();
        let (n_s, n_g, n_f, n_d) = (pick(2, 6), pick(2, 6), pick(2, 6), pick(2, 6));

        let mut g = Generator::new(s, m, &g_hidden, v)?;
        g.net.init_normal(rng, 0.5);
        let mut d = Discriminator::new(v, &d_hidden, c)?;
        d.init_normal(rng, 0.5);
        randomize_biases(&mut g.net.layers, 0.1, rng);
        randomize_biases(&mut d.trunk.layers, 1e-3, rng);
        randomize_biases(std::slice::from_mut(&mut d.classes), 0.1, rng);
        debug_assert!(g.net.num_params() <= MAX_PARAMS && d.num_params() <= MAX_PARAMS);

        let level = |n: usize, rng: &mut SeededRng| LevelBatch {
            semantics: normal(n, s, rng),
            noise: normal(n, m, rng),
            centers: normal(n, v, rng),
        };
        let generator_batch = GeneratorBatch {
            species: level(n_s, rng),
            labels: (0..n_s).map(|_| rng.below(c)).collect(),
            genus: Some(level(n_g, rng)),
            family: Some(level(n_f, rng)),
        };
        let discriminator_batch = DiscriminatorBatch {
            real: normal(n_d, v, rng),
            fake: normal(n_d, v, rng),
            labels: (0..n_d).map(|_| rng.below(c)).collect(),
            alphas: (0..n_d).map(|_| rng.uniform()).collect(),
        };
        Ok(Self {
            generator: g,
            discriminator: d,
            generator_batch,
            discriminator_batch,
        })
    }

    /// Smallest distance to a kink over every forward pass either objective makes.
    fn kink_distance(&self) -> Result<f64> {
        let g = &self.generator;
        let d = &self.discriminator;
        let mut dist = f64::INFINITY;
        let gb = &self.generator_batch;
        for lb in [Some(&gb.species), gb.genus.as_ref(), gb.family.as_ref()]
            .into_iter()
            .flatten()
        {
            let (fake, tape) = g.forward(&lb.semantics, &lb.noise)?;
            dist = dist.min(g.net.kink_distance(&tape));
            let fwd = d.forward(&fake)?;
            dist = dist.min(d.trunk.kink_distance(fwd.tape()));
        }
        for scale in [1.0, WASSERSTEIN_INPUT_SCALE] {
            let db = self.scaled_critic_batch(scale);
            let mixed = interpolate(&db.real, &db.fake, &db.alphas)?;
            for x in [&db.real, &db.fake, &mixed] {
                dist = dist.min(d.trunk.kink_distance(d.forward(x)?.tape()));
            }
        }
        Ok(dist)
    }

    fn scaled_critic_batch(&self, scale: f64) -> DiscriminatorBatch {
        let db = &self.discriminator_batch;
        DiscriminatorBatch {
            real: db.real.map(|x| scale * x),
            fake: db.fake.map(|x| scale * x),
            labels: db.labels.clone(),
            alphas: db.alphas.clone(),
        }
    }
}

fn normal(rows: usize, cols: usize, rng: &mut SeededRng) -> Tensor {
    Tensor::from_vec(rows, cols, rng.normal_vec(rows * cols)).expect("sized")
}

fn randomize_biases(layers: &mut [crate::numerics::Layer], std: f64, rng: &mut SeededRng) {
    for l in layers {
        for b in l.bias.as_mut_slice() {
            *b = std * rng.normal();
        }
    }
}

/// A scalar loss of one network's flat parameters with its analytic gradient.
pub trait GradientProbe: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn params(&self, case: &ProbeCase) -> Vec<f64>;
    fn loss(&self, case: &ProbeCase, params: &[f64]) -> Result<f64>;
    fn gradient(&self, case: &ProbeCase) -> Result<Vec<f64>>;
}

/// Generator objective with a fixed weighting of its terms.
pub struct GeneratorProbe {
    pub name: &'static str,
    pub description: &'static str,
    pub weights: GeneratorWeights,
}

impl Named for GeneratorProbe {
    fn name(&self) -> &'static str {
        self.name
    }
}

impl GradientProbe for GeneratorProbe {
    fn description(&self) -> &'static str {
        self.description
    }

    fn params(&self, case: &ProbeCase) -> Vec<f64> {
        case.generator.net.to_flat()
    }

    fn loss(&self, case: &ProbeCase, params: &[f64]) -> Result<f64> {
        let mut g = case.generator.clone();
        g.net.read_flat(params)?;
        Ok(generator_objective(&g, &case.discriminator, &case.generator_batch, &self.weights)?.total)
    }

    fn gradient(&self, case: &ProbeCase) -> Result<Vec<f64>> {
        let out = generator_objective(
            &case.generator,
            &case.discriminator,
            &case.generator_batch,
            &self.weights,
        )?;
        Ok(out.grads.to_flat())
    }
}

/// Discriminator objective with a fixed weighting of its terms, on the
/// case's critic batch scaled by `input_scale`.
pub struct DiscriminatorProbe {
    pub name: &'static str,
    pub description: &'static str,
    pub weights: DiscriminatorWeights,
    pub input_scale: f64,
}

impl Named for DiscriminatorProbe {
    fn name(&self) -> &'static str {
        self.name
    }
}

impl GradientProbe for DiscriminatorProbe {
    fn description(&self) -> &'static str {
        self.description
    }

    fn params(&self, case: &ProbeCase) -> Vec<f64> {
        case.discriminator.to_flat()
    }

    fn loss(&self, case: &ProbeCase, params: &[f64]) -> Result<f64> {
        let mut d = case.discriminator.clone();
        d.read_flat(params)?;
        let batch = case.scaled_critic_batch(self.input_scale);
        Ok(discriminator_objective(&d, &batch, &self.weights)?.total)
    }

    fn gradient(&self, case: &ProbeCase) -> Result<Vec<f64>> {
        let batch = case.scaled_critic_batch(self.input_scale);
        let out = discriminator_objective(&case.discriminator, &batch, &self.weights)?;
        Ok(out.grads.to_flat())
    }
}

/// Every generator and discriminator loss term, singly and combined.
pub fn probes() -> Registry<dyn GradientProbe> {
    let gen = |name, description, wasserstein, classification, regularizer| {
        Arc::new(GeneratorProbe {
            name,
            description,
            weights: GeneratorWeights {
                wasserstein,
                classification,
                regularizer,
            },
        }) as Arc<dyn GradientProbe>
    };
    let disc = |name, description, wasserstein, gradient_penalty, classification, input_scale| {
        Arc::new(DiscriminatorProbe {
            name,
            description,
            weights: DiscriminatorWeights {
                wasserstein,
                gradient_penalty,
                classification,
            },
            input_scale,
        }) as Arc<dyn GradientProbe>
    };
    [
        gen("tr_species", "species center distance", 0.0, 0.0, [1.0, 0.0, 0.0]),
        gen("tr_genus", "genus center distance (sibling semantics)", 0.0, 0.0, [0.0, 1.0, 0.0]),
        gen("tr_family", "family center distance (sibling semantics)", 0.0, 0.0, [0.0, 0.0, 1.0]),
        gen("tr_total", "weighted center distances", 0.0, 0.0, [0.6, 0.2, 0.2]),
        gen("generator_wasserstein", "generator critic term", 1.0, 0.0, [0.0; 3]),
        gen("generator_classification", "generator class-head cross-entropy", 0.0, 1.0, [0.0; 3]),
        gen("generator_total", "full generator loss", 1.0, 1.0, [0.6, 0.2, 0.2]),
        disc("discriminator_wasserstein", "critic real/fake gap", 1.0, 0.0, 0.0, WASSERSTEIN_INPUT_SCALE),
        disc("gradient_penalty", "critic gradient-norm penalty", 0.0, 1.0, 0.0, 1.0),
        disc("discriminator_classification", "real-sample class-head cross-entropy", 0.0, 0.0, 1.0, 1.0),
        disc("discriminator_total", "full discriminator loss", 1.0, 10.0, 1.0, 1.0),
    ]
    .into_iter()
    .fold(Registry::new("gradient probe"), Registry::with)
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub cases: usize,
    pub seed: u64,
    pub eps: f64,
    pub tolerance: f64,
    /// Test hook: perturb the analytic gradient of this probe before comparing.
    pub corrupt: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            cases: 20,
            seed: 0,
            eps: EPS,
            tolerance: TOLERANCE,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub name: &'static str,
    pub description: &'static str,
    pub cases: usize,
    pub max_params: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Runs every probe on the same `cases` random instances.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<Vec<ProbeReport>> {
    if opts.cases == 0 {
        return Err(Error::InvalidConfig("gradient check needs at least one case".into()));
    }
    let registry = probes();
    if let Some(name) = &opts.corrupt {
        registry.get(name)?;
    }
    let mut rng = SeededRng::new(opts.seed).substream("gradcheck");
    let cases = (0..opts.cases)
        .map(|_| ProbeCase::random(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    registry
        .iter()
        .map(|probe| {
            let mut worst = 0.0f64;
            let mut max_params = 0;
            for case in &cases {
                let p = probe.params(case);
                max_params = max_params.max(p.len());
                let mut analytic = probe.gradient(case)?;
                if opts.corrupt.as_deref() == Some(probe.name()) {
                    analytic[0] += 1e-3 * analytic[0].abs().max(1.0);
                }
                let mut failure = None;
                let numeric = finite_diff_grad(
                    |q| match probe.loss(case, q) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    &p,
                    opts.eps,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                let err = max_relative_error(&analytic, &numeric);
                worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
            }
            Ok(ProbeReport {
                name: probe.name(),
                description: probe.description(),
                cases: cases.len(),
                max_params,
                max_relative_error: worst,
                passed: worst < opts.tolerance,
            })
        })
        .collect()
}

pub fn write_report(path: &Path, reports: &[ProbeReport]) -> Result<()> {
    write_table(
        path,
        "loss,cases,max_params,max_relative_error,status",
        reports.iter().map(|r| {
            format!(
                "{},{},{},{:e},{}",
                r.name,
                r.cases,
                r.max_params,
                r.max_relative_error,
                if r.passed { "pass" } else { "FAIL" }
            )
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_term_is_registered() {
        assert_eq!(probes().len(), 11);
        assert!(probes().get("gradient_penalty").is_ok());
    }

    #[test]
    fn few_cases_pass_and_corruption_fails() {
        let opts = GradcheckOptions {
            cases: 3,
            seed: 1,
            ..GradcheckOptions::default()
        };
        let reports = run_gradcheck(&opts).unwrap();
        for r in &reports {
            assert!(r.passed, "{}: {:e}", r.name, r.max_relative_error);
        }
        let bad = run_gradcheck(&GradcheckOptions {
            corrupt: Some("tr_genus".into()),
            ..opts
        })
        .unwrap();
        for r in &bad {
            assert_eq!(r.passed, r.name != "tr_genus", "{}", r.name);
        }
    }
}
