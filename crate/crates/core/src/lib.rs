//! Simulation and moderate-deviation analysis of density-dependent Markov
//! chains.
//!
//! * [`model`]: chain specifications, validation and rate evaluation.
//! * [`simulate`]: exact path sampling, plain and exponentially tilted.
//! * [`fluid`]: the fluid ODE, its linearisation and the fluctuation
//!   covariance.
//! * [`ratefn`]: the quadratic rate functional and its minimisers.
//! * [`experiments`]: Monte Carlo harness for the limit theorems.

pub mod experiments;
pub mod fluid;
pub mod model;
pub mod ratefn;
pub mod simulate;
pub mod stats;

pub use model::{validate_model, Builtin, ModelError, ModelSpec, ValidatedModel};
