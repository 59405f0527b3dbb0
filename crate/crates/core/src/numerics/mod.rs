//! Dense linear algebra, MLPs, Adam, seeded randomness and a
//! finite-difference gradient oracle.

pub mod adam;
pub mod gradcheck;
pub mod mlp;
pub mod rng;
pub mod tensor;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error};
pub use mlp::{Activation, InputGradient, Layer, MlpParams, Tape};
pub use rng::{derive_seed, SeededRng};
pub use tensor::{dot, euclidean, squared_distance, Tensor};
