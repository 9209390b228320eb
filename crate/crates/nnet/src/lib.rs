//! A small feed-forward network engine for scalar regression: dense,
//! 2-D convolution, max-pooling, flatten and ReLU layers, trained on squared
//! error with Adam. Everything is `f64`.

mod checkpoint;
mod error;
mod gradcheck;
mod layer;
mod model;
mod shape;
mod train;

pub use checkpoint::{load_model, read_model, save_model, write_model, MODEL_FORMAT, MODEL_VERSION};
pub use error::{Error, ErrorKind, Result};
pub use gradcheck::{analytic_gradient, gradient_check, FD_STEP};
pub use layer::{Conv2d, Dense, Layer, MaxPool2d};
pub use model::{build_cnn, build_mlp, Model, PaddingPolicy};
pub use shape::{Activation, LayerSpec, Padding, Shape};
pub use train::{evaluate_mse, train, EpochStats, History, Optimizer, TrainConfig};

pub use ndarray;
