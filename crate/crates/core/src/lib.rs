//! Guided mixture-of-experts (GMoE) sequence models for joint human action
//! prediction and whole-body motion forecasting.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the clock or the terminal lives in the companion `gmoe` crate.
//!
//! Layout:
//! - [`tensor`] and [`rng`]: dense f64 arrays, kernels and a seeded generator.
//! - [`layers`]: dense, LSTM, dropout and the input standardizer, each with an
//!   explicit forward/backward pair.
//! - [`model`]: the gated mixture of LSTM experts and the stacked-LSTM baseline.
//! - [`loss`]: the combined action/motion objective and evaluation metrics.
//! - [`train`]: Adam, chronological splits, early stopping and multi-seed runs.
//! - [`data`]: motion records, the synthetic regime-switching generator and
//!   windowing.
#![no_std]

extern crate alloc;

pub mod data;
mod error;
pub mod layers;
pub mod loss;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use tensor::Tensor;
