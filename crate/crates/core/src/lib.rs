//! MagicNet: a lightweight, strictly causal voice activity detector.
//!
//! The crate covers the whole pipeline:
//!
//! - [`audio`]: PCM16 WAV I/O, SNR-controlled mixing and labeled toy corpora.
//! - [`features`]: 40-band log-mel filterbank (Fbank40) extraction, batch and streaming.
//! - [`nn`]: tensors plus forward/backward passes for causal convolution,
//!   batch norm, GRU, linear, BCE and Adam.
//! - [`model`]: the assembled network, streaming inference and the `MGNT` weight format.
//! - [`eval`]: training loop, F1/ROC-AUC metrics and real-time-factor benchmarking.
//!
//! Layer code is generic over [`Real`] so gradients can be verified in `f64`
//! while training and inference run in `f32`.

pub mod audio;
pub mod eval;
pub mod features;
pub mod model;
pub mod nn;
mod real;
pub mod rng;

pub use real::Real;

/// Sample rate used everywhere in the pipeline.
pub const SAMPLE_RATE_HZ: u32 = 16_000;
