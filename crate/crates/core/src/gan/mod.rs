//! Conditional WGAN with taxonomy regularisation.

mod checkpoint;
mod loss;
mod model;
mod objective;
pub mod regularizer;
mod train;

pub use checkpoint::{Checkpoint, Dims, LayerRecord};
pub use loss::{
    classification_loss, classification_loss_with_grad, generator_loss, gradient_penalty,
    interpolate, tr_loss, tr_term, tr_term_with_grad, TrWeights,
};
pub use model::{Discriminator, DiscriminatorForward, Generator};
pub use objective::{
    discriminator_objective, generator_objective, DiscriminatorBatch, DiscriminatorLoss,
    DiscriminatorWeights, GeneratorBatch, GeneratorLoss, GeneratorWeights, LevelBatch,
};
pub use regularizer::{regularizers, Regularizer};
pub use train::{train, write_log, LogRow, TrainConfig, TrainOutcome};
