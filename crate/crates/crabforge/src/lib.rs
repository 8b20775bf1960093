//! Synthesis and stress-testing of control pulses for a universal
//! two-qubit gate set on a pair of simulated transmons.
//!
//! Controls are parameterized in a randomized chopped trigonometric basis
//! and optimized by direct search against the gate infidelity of the
//! piecewise-constant time evolution. Converged pulses can then be
//! stressed with additive white noise or coefficient distortion to find
//! the largest disturbance they tolerate.

pub mod cli;
pub mod crab;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod model;
pub mod propagate;
pub mod optimize;
pub mod robustness;
pub mod seeds;
pub mod spectrum;

pub use error::{Error, Result};
