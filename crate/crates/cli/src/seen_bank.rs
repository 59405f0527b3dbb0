//! Where the seen-class half of the generalized zero-shot bank comes from.

use std::collections::BTreeMap;
use std::sync::Arc;

use taxozsl::data::Dataset;
use taxozsl::eval::{synthesize_bank, SynthesizedBank};
use taxozsl::gan::Generator;
use taxozsl::registry::{Named, Registry};
use taxozsl::taxonomy::SpeciesId;
use taxozsl::Result;

pub struct SeenBankInput<'a> {
    pub generator: &'a Generator,
    pub semantics: &'a BTreeMap<SpeciesId, Vec<f64>>,
    /// Seen samples the generator was trained on.
    pub seen_train: &'a Dataset,
    pub n: usize,
    pub seed: u64,
}

pub trait SeenBank: Named + Send + Sync {
    fn build(&self, input: &SeenBankInput) -> Result<SynthesizedBank>;
}

/// `n` generated features per seen class, like the unseen side.
pub struct Synthesized;

impl Named for Synthesized {
    fn name(&self) -> &'static str {
        "synthesized"
    }
}

impl SeenBank for Synthesized {
    fn build(&self, input: &SeenBankInput) -> Result<SynthesizedBank> {
        synthesize_bank(input.generator, input.semantics, input.n, input.seed)
    }
}

/// The real training features of the seen classes.
pub struct Real;

impl Named for Real {
    fn name(&self) -> &'static str {
        "real"
    }
}

impl SeenBank for Real {
    fn build(&self, input: &SeenBankInput) -> Result<SynthesizedBank> {
        SynthesizedBank::from_dataset(input.seen_train)
    }
}

pub fn seen_banks() -> Registry<dyn SeenBank> {
    let entries: [Arc<dyn SeenBank>; 2] = [Arc::new(Synthesized), Arc::new(Real)];
    entries
        .into_iter()
        .fold(Registry::new("seen bank"), Registry::with)
}
