//! Generative zero-shot learning with taxonomy-aware training.
//!
//! A conditional Wasserstein generator maps per-class semantic vectors (plus
//! noise) to visual features. Training data are expanded with the semantic
//! vectors of taxonomy siblings, and the generator is pulled towards the
//! species, genus and family visual centers. Unseen classes are then
//! recognised by nearest neighbour against synthesized feature banks.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod gan;
pub mod numerics;
pub mod registry;
pub mod table;
pub mod taxonomy;

pub use error::{Error, Result};
