//! AGOP-filtered input-times-gradient attribution for tabular classifiers,
//! four baseline attributors, a synthetic ground-truth benchmark and a
//! remove-and-retrain evaluation.
//!
//! The runnable programs under `examples/` walk through each capability; the
//! `agop-bench` binary drives full experiments from TOML configs.

pub mod attribution;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod roar;
pub mod tabular;

pub use error::{Error, Result};
pub use matrix::Matrix;
