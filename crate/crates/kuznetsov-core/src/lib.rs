//! Numerical toolkit for the GL(3) Kuznetsov formula.
//!
//! The crate evaluates both sides of the spectral summation formula relating
//! Fourier coefficients of GL(3) automorphic forms to Kloosterman sums:
//! exact classical / GL(3) / twisted Kloosterman sums, the GL(3) Whittaker
//! function through two independent integral representations, Stade-type
//! Mellin norm identities, the archimedean weight transforms appearing on
//! both sides, Eisenstein Fourier coefficients, and a desk-scale assembler
//! that puts the pieces together.
//!
//! Layout:
//! - [`spectral`]: spectral-parameter algebra (Weyl orbit, classification).
//! - [`numerics`]: special functions and adaptive quadrature.
//! - [`kloosterman`]: exact exponential sums and bound certificates.
//! - [`whittaker`]: GL(3) and GL(2) Whittaker evaluators.
//! - [`stade`]: Mellin norm identities (numeric LHS vs. Gamma-product RHS).
//! - [`transforms`]: spectral weights and arithmetic-side kernels.
//! - [`coefficients`]: Eisenstein Fourier coefficients and GL(2) data.
//! - [`assembler`]: full two-sided assembly and the desk-scale experiments.

pub mod assembler;
pub mod coefficients;
pub mod kloosterman;
pub mod numerics;
pub mod spectral;
pub mod stade;
pub mod transforms;
pub mod whittaker;

pub use num_complex::Complex64;
