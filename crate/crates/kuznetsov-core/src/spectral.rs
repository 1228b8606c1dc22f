//! Spectral-parameter algebra for GL(3).
//!
//! A point of the spectrum is described by two complex numbers (ν₁, ν₂).
//! Everything else is derived: ν₀ = ν₁ + ν₂ and the Langlands parameters
//!
//! ```text
//! α₁ = 2ν₁ + ν₂,   α₂ = −ν₁ + ν₂,   α₃ = −ν₁ − 2ν₂,
//! ```
//!
//! which always sum to zero. The Weyl group of order 6 permutes the αⱼ and
//! acts on (ν₁, ν₂) by the six substitutions in [`SpectralParams::weyl_orbit`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Absolute tolerance on real parts used by the unitarity and
/// Jacquet–Shalika checks. Inputs typically arrive from floating-point
/// sweeps, so exact zero tests would be too strict.
pub const RE_TOL: f64 = 1e-9;

/// A GL(3) spectral parameter (ν₁, ν₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub nu1: Complex64,
    pub nu2: Complex64,
}

/// Outcome of [`SpectralParams::classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralClass {
    /// All Langlands parameters purely imaginary.
    Tempered,
    /// Non-tempered but unitary: parameters in the normal form
    /// (α₁, α₂, α₃) = (ρ + iγ, −ρ + iγ, −2iγ) with ρ > 0, γ ≥ 0.
    Exceptional { rho: f64, gamma: f64 },
    /// Fails unitarity or the |Re αⱼ| ≤ 1/2 self-duality window.
    Invalid,
}

impl SpectralParams {
    pub fn new(nu1: Complex64, nu2: Complex64) -> Self {
        Self { nu1, nu2 }
    }

    /// Convenience constructor from purely imaginary parts: (i·t1, i·t2).
    pub fn tempered(t1: f64, t2: f64) -> Self {
        Self::new(Complex64::new(0.0, t1), Complex64::new(0.0, t2))
    }

    /// The canonical non-tempered point with parameters
    /// (ν₁, ν₂) = (2ρ/3, −ρ/3 + iγ).
    pub fn exceptional(rho: f64, gamma: f64) -> Self {
        Self::new(
            Complex64::new(2.0 * rho / 3.0, 0.0),
            Complex64::new(-rho / 3.0, gamma),
        )
    }

    pub fn nu0(&self) -> Complex64 {
        self.nu1 + self.nu2
    }

    /// Langlands parameters (α₁, α₂, α₃); they sum to zero by construction.
    pub fn alpha(&self) -> [Complex64; 3] {
        [
            2.0 * self.nu1 + self.nu2,
            -self.nu1 + self.nu2,
            -self.nu1 - 2.0 * self.nu2,
        ]
    }

    /// Reconstruct (ν₁, ν₂) from an ordered triple of Langlands parameters.
    /// Only the differences enter, so a triple that fails α₁+α₂+α₃ = 0 is
    /// projected onto the trace-zero plane implicitly.
    pub fn from_alpha(alpha: [Complex64; 3]) -> Self {
        Self::new((alpha[0] - alpha[1]) / 3.0, (alpha[1] - alpha[2]) / 3.0)
    }

    /// The six Weyl-group images of (ν₁, ν₂), identity first. Each image has
    /// the same α-multiset and the same {|Im ν₀|, |Im ν₁|, |Im ν₂|} multiset.
    pub fn weyl_orbit(&self) -> [SpectralParams; 6] {
        let (a, b) = (self.nu1, self.nu2);
        let s = a + b;
        [
            Self::new(a, b),
            Self::new(-a, s),
            Self::new(b, -s),
            Self::new(-b, -a),
            Self::new(-s, a),
            Self::new(s, -b),
        ]
    }

    /// max |Re αⱼ|, the distance from temperedness.
    pub fn theta(&self) -> f64 {
        self.alpha()
            .iter()
            .map(|a| a.re.abs())
            .fold(0.0, f64::max)
    }

    /// Laplace eigenvalue λ = 1 − 3ν₁² − 3ν₁ν₂ − 3ν₂² = 1 − ½Σαⱼ².
    pub fn laplace_eigenvalue(&self) -> Complex64 {
        let (a, b) = (self.nu1, self.nu2);
        Complex64::new(1.0, 0.0) - 3.0 * (a * a + a * b + b * b)
    }

    /// Whether {αⱼ} = {−ᾱⱼ} as multisets (the unitarity condition).
    pub fn is_unitary(&self) -> bool {
        let alpha = self.alpha();
        let mut target: Vec<Complex64> = alpha.iter().map(|a| -a.conj()).collect();
        for a in alpha.iter() {
            let Some(pos) = target
                .iter()
                .position(|t| (t - a).norm() <= RE_TOL * (1.0 + a.norm()))
            else {
                return false;
            };
            target.swap_remove(pos);
        }
        true
    }

    /// Classify as tempered, exceptional (with its unique (ρ, γ) normal
    /// form), or invalid. Unitarity and the |Re αⱼ| ≤ 1/2 window are
    /// rechecked here; callers do not need to pre-validate.
    pub fn classify(&self) -> SpectralClass {
        if !self.is_unitary() || self.theta() > 0.5 + RE_TOL {
            return SpectralClass::Invalid;
        }
        let alpha = self.alpha();
        if alpha.iter().all(|a| a.re.abs() <= RE_TOL) {
            return SpectralClass::Tempered;
        }
        // Non-tempered unitary triple: {ρ + iγ, −ρ + iγ, −2iγ} for some
        // ρ > 0 and real γ. Read ρ from the parameter with the largest
        // real part and γ from its imaginary part; flip the sign of γ
        // (a dual/conjugation symmetry of the orbit) to make it ≥ 0.
        let lead = alpha
            .iter()
            .copied()
            .max_by(|x, y| x.re.partial_cmp(&y.re).unwrap())
            .unwrap();
        SpectralClass::Exceptional {
            rho: lead.re,
            gamma: lead.im.abs(),
        }
    }
}
