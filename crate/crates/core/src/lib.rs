//! Entanglement quantification from local measurement statistics.
//!
//! State sampling, exact outcome statistics, entanglement labels, dataset
//! generation and evaluation. The regression networks live in `qent-nnet`.

pub mod analysis;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod measures;
pub mod presets;
pub mod rng;
pub mod states;

pub use error::{Error, ErrorKind, Result};
