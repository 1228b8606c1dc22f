//! Special functions and quadrature.
//!
//! Everything downstream leans on this module: complex log-Gamma, the
//! K-Bessel function with complex order, ζ(1+it), Mellin/Fourier transforms
//! of the compactly supported bump profile, and adaptive quadrature in one
//! to five dimensions.

pub mod bessel;
pub mod bump;
pub mod gamma;
pub mod quad;
pub mod zeta;

pub use bessel::bessel_k;
pub use bump::{mellin_bump, BumpProfile};
pub use gamma::{abs_gamma, log_gamma};
pub use quad::{adaptive_1d, adaptive_1d_with_breaks, gauss_legendre, quad_nd, EvalBudget, QuadOptions};
pub use zeta::{inv_zeta_one_line_sq, zeta_one_line};

use num_complex::Complex64;

/// Result of an adaptive quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    /// Heuristic error estimate (not a rigorous enclosure).
    pub err_estimate: f64,
    pub evaluations: u64,
    /// True when the estimate met the requested tolerance within budget.
    pub converged: bool,
}

impl QuadResult {
    /// An exact zero produced without evaluating the integrand, used by
    /// compact-support short-circuits.
    pub fn exact_zero() -> Self {
        QuadResult {
            value: Complex64::new(0.0, 0.0),
            err_estimate: 0.0,
            evaluations: 0,
            converged: true,
        }
    }
}

/// Errors surfaced by the numerical layer.
#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("argument hits a pole: {0}")]
    Pole(String),
    #[error("quadrature failed to converge: {0}")]
    NoConvergence(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
