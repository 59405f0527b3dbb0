//! Zero-shot evaluation: feature banks, nearest-neighbour classification,
//! accuracy metrics, retrieval and embedding export.

mod bank;
mod embedding;
mod knn;
mod metrics;
mod retrieval;

pub use bank::{synthesize_bank, SynthesizedBank};
pub use embedding::{export_embedding, write_embedding, EmbeddingRow, FeatureKind};
pub use knn::{classify, classify_all, Prediction};
pub use metrics::{
    ausuc, ausuc_from_predictions, calibration_grid, harmonic_mean, per_class_accuracy,
    top1_per_class, ClassAccuracy, SucCurve, SucPoint,
};
pub use retrieval::{
    average_precision, mean_average_precision, retrieve, target_count, Retrieval, FRACTIONS,
};

/// Offsets in the default calibration grid.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Synthesized features per class.
pub const DEFAULT_SYNTH_PER_CLASS: usize = 60;
