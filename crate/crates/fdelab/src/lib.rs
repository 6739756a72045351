//! Numerical laboratory for gradient estimates of positive solutions of the
//! weighted fast-diffusion equation ∂t u = Δ_f(u^p) + 𝒩(t, x, u), 0 < p < 1,
//! on one-dimensional weighted manifolds with a conformally evolving metric.
//!
//! The crate solves the equation, transforms solutions to pressure
//! variables, evaluates the pointwise identities and inequalities that drive
//! the estimates, and compares solved fields against the estimate bounds.

pub mod calculus;
pub mod cli;
pub mod estimates;
pub mod exponents;
pub mod fd;
pub mod geometry;
pub mod identities;
pub mod nonlinearity;
pub mod solver;

use serde::{Deserialize, Serialize};

/// Pressure regime: I uses v = p/(1-p) u^{p-1} (0 < p < 1),
/// II uses v = u^{p-1/2} (1/2 < p < 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    I,
    II,
}
