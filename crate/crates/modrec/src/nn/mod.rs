//! A small dense/convolutional network engine with exact backpropagation,
//! inverted dropout, the two CNN penalty terms, and Adam — everything the
//! raw-IQ and expert-feature classifiers need, in pure f64 with fixed
//! operation order so training runs are bit-reproducible.
//!
//! Layout: [`tensor`] holds the row-major array type and GEMM kernel,
//! [`layers`] the per-layer forward/backward math, [`model`] the
//! architecture specs and the assembled network, [`train`] the loss,
//! optimizer, training loop, and gradient checker.

pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

pub use layers::LayerError;
pub use model::{Layer, LayerSpec, Model, ModelError, ModelSpec, N_CLASSES};
pub use tensor::{Tensor, TensorError};
pub use train::{
    adam_step, argmax_rows, evaluate, grad_check, grad_check_negative_control, softmax_xent,
    train, write_history_csv,
    AdamState, EpochStats, TrainConfig, TrainError, TrainReport,
};
