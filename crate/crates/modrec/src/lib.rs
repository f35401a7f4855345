//! Modulation recognition at desk scale: synthesize labeled IQ datasets under
//! realistic channel impairments, extract cyclic-moment expert features, and
//! train classifiers — classical ones on the features, small convolutional
//! networks on the raw IQ windows — then compare them per SNR.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`modem`] turns seeded payloads (bits or synthetic audio) into
//!    unit-power complex baseband signals for eleven modulation classes.
//! 2. [`channel`] degrades a signal with clock drift, multipath fading,
//!    carrier frequency offset, and AWGN at a labeled SNR.
//! 3. [`dataset`] windows the result into 128-sample frames, serializes them
//!    in a stable binary format, and splits them without window leakage.
//! 4. [`features`] reduces a frame to 32 cyclic-moment statistics.
//! 5. [`baselines`] (k-NN, naive Bayes, decision tree, SVM) and [`nn`]
//!    (convolutional / dense networks trained with Adam) learn the labels.
//! 6. [`eval`] produces confusion matrices, accuracy-vs-SNR curves, timing
//!    comparisons, and deterministic report files.
//!
//! Everything is driven by explicit [`iq::SeedSpec`] values; two runs with the
//! same seeds produce bit-identical signals, datasets, and training histories.

pub mod baselines;
pub mod channel;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod iq;
pub mod model_io;
pub mod modem;
pub mod nn;

#[cfg(test)]
pub(crate) mod testutil;
