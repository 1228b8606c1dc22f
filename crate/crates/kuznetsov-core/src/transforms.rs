//! Weight functions on the two sides of the spectral summation formula.
//!
//! The spectral side carries the squared pairing of a two-parameter test
//! function against the normalized Whittaker function. We evaluate it
//! through the shifted-contour Mellin (Parseval) representation, where the
//! Γ-kernel decay is explicit, together with its large-parameter asymptotic
//! and the non-tempered scaling audit. The arithmetic side carries the
//! oscillatory kernel integrals attached to the intermediate and the long
//! Weyl element. Their bump-support algebra yields exact emptiness
//! certificates (the kernels vanish identically once the support windows
//! become incompatible), which we test in closed form before any quadrature
//! runs. A tau-integrated variant of the long-element kernel and Monte-Carlo
//! volume estimates for the support shells round out the module.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{gauss_legendre, log_gamma, BumpProfile, QuadResult};
use crate::spectral::{SpectralClass, SpectralParams};
use crate::whittaker::imag_gamma_norm;

/// Failure modes of the weight-function evaluators.
#[derive(Debug, Error)]
pub enum TransformError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature did not converge: relative error {err:.3e} exceeds tolerance {tol:.3e}")]
    NonConvergent { err: f64, tol: f64 },
    #[error(
        "Monte-Carlo estimate too noisy: {hits} hits from {samples} samples \
         (relative standard error {se_rel:.2})"
    )]
    InsufficientSamples {
        hits: u64,
        samples: u64,
        se_rel: f64,
    },
}

fn precondition(msg: impl Into<String>) -> TransformError {
    TransformError::Precondition(msg.into())
}

/// Sign of one oscillatory phase on the arithmetic side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn csv(self) -> &'static str {
        match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        }
    }
}

/// Two-variable test function
/// F(y₁,y₂) = (R₁R₂(R₁+R₂))^{1/2} f(X₁y₁) f(X₂y₂) y₁^{it₁} y₂^{it₂}
/// with derived exponents t₁ = τ₁+2τ₂ and t₂ = τ₂+2τ₁.
///
/// The profile pins the support to [1/X₁, 2/X₁] × [1/X₂, 2/X₂]; the
/// exponents are always recomputed from (τ₁, τ₂), never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionSpec {
    pub profile: BumpProfile,
    pub x1: f64,
    pub x2: f64,
    pub r1: f64,
    pub r2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl TestFunctionSpec {
    pub fn new(
        profile: BumpProfile,
        x1: f64,
        x2: f64,
        r1: f64,
        r2: f64,
        tau1: f64,
        tau2: f64,
    ) -> Result<Self, TransformError> {
        let all_finite = [x1, x2, r1, r2, tau1, tau2].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(precondition("test-function parameters must be finite"));
        }
        if x1 < 1.0 || x2 < 1.0 {
            return Err(precondition("X1, X2 must be >= 1"));
        }
        if r1 < 1.0 || r2 < 1.0 {
            return Err(precondition("R1, R2 must be >= 1"));
        }
        if tau1 < 0.0 || tau2 < 0.0 {
            return Err(precondition("tau1, tau2 must be >= 0"));
        }
        Ok(Self {
            profile,
            x1,
            x2,
            r1,
            r2,
            tau1,
            tau2,
        })
    }

    /// Standard profile with X₁ = X₂ = R₁ = R₂ = 1.
    pub fn standard(tau1: f64, tau2: f64) -> Result<Self, TransformError> {
        Self::new(BumpProfile::standard(), 1.0, 1.0, 1.0, 1.0, tau1, tau2)
    }

    /// First oscillation exponent t₁ = τ₁ + 2τ₂.
    pub fn t1(&self) -> f64 {
        self.tau1 + 2.0 * self.tau2
    }

    /// Second oscillation exponent t₂ = τ₂ + 2τ₁.
    pub fn t2(&self) -> f64 {
        self.tau2 + 2.0 * self.tau1
    }

    /// The (R₁R₂(R₁+R₂))^{1/2} prefactor of F.
    pub fn normalization(&self) -> f64 {
        (self.r1 * self.r2 * (self.r1 + self.r2)).sqrt()
    }

    /// Point evaluation of F.
    pub fn eval(&self, y1: f64, y2: f64) -> Complex64 {
        let amp = self.profile.eval(self.x1 * y1) * self.profile.eval(self.x2 * y2);
        if amp == 0.0 || y1 <= 0.0 || y2 <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase = self.t1() * y1.ln() + self.t2() * y2.ln();
        self.normalization() * amp * Complex64::from_polar(1.0, phase)
    }
}

/// Amplitude data of a kernel query: the intermediate Weyl element takes a
/// single modulus ratio, the long element a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelAmplitude {
    Single(f64),
    Pair(f64, f64),
}

/// One arithmetic-side kernel evaluation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery {
    pub spec: TestFunctionSpec,
    pub eps1: Sign,
    pub eps2: Sign,
    pub amplitude: KernelAmplitude,
}

impl KernelQuery {
    /// Query for the intermediate-element kernel; `eps2` is unused there.
    pub fn intermediate(
        spec: TestFunctionSpec,
        eps: Sign,
        a: f64,
    ) -> Result<Self, TransformError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(precondition("amplitude A must be positive and finite"));
        }
        Ok(Self {
            spec,
            eps1: eps,
            eps2: Sign::Plus,
            amplitude: KernelAmplitude::Single(a),
        })
    }

    /// Query for the long-element kernel with amplitude pair (A₁, A₂).
    pub fn long_element(
        spec: TestFunctionSpec,
        eps1: Sign,
        eps2: Sign,
        a1: f64,
        a2: f64,
    ) -> Result<Self, TransformError> {
        if !(a1 > 0.0 && a1.is_finite() && a2 > 0.0 && a2.is_finite()) {
            return Err(precondition("amplitudes A1, A2 must be positive and finite"));
        }
        Ok(Self {
            spec,
            eps1,
            eps2,
            amplitude: KernelAmplitude::Pair(a1, a2),
        })
    }
}

/// Header for kernel CSV exports.
pub const KERNEL_CSV_HEADER: &str = "A1,A2,eps1,eps2,tau1,tau2,X1,X2,re,im,err";

/// One CSV row for a kernel evaluation. Intermediate-element queries leave
/// the A2 column empty.
pub fn kernel_csv_row(q: &KernelQuery, r: &QuadResult) -> String {
    let (a1, a2) = match q.amplitude {
        KernelAmplitude::Single(a) => (format!("{a}"), String::new()),
        KernelAmplitude::Pair(a1, a2) => (format!("{a1}"), format!("{a2}")),
    };
    format!(
        "{},{},{},{},{},{},{},{},{:.17e},{:.17e},{:.3e}",
        a1,
        a2,
        q.eps1.csv(),
        q.eps2.csv(),
        q.spec.tau1,
        q.spec.tau2,
        q.spec.x1,
        q.spec.x2,
        r.value.re,
        r.value.im,
        r.err_estimate,
    )
}

// ---------------------------------------------------------------------------
// Spectral side: the Parseval double-contour integral.
// ---------------------------------------------------------------------------

/// Real part of the integration contour in the double Mellin integral.
/// It must clear every Γ-pole on the left: the numerator poles sit at
/// Re u = −Re αⱼ ≤ 1/2 for unitary spectral data.
pub const PARSEVAL_CONTOUR: f64 = 0.6;

/// Contour truncation margin beyond the spectral window. Outside the
/// α-polytope the Γ-kernel decays like exp(−π·offset/2), so the neglected
/// tail is far below every tolerance this module hands out.
const PARSEVAL_WINDOW_MARGIN: f64 = 40.0;

/// One contour axis sampled on the uniform grid v_k = −v_max + k·h:
/// Mellin factor, Γ-product, (X/π)^{iv} phase, and trapezoid weight, all
/// folded into a single complex value per node.
fn parseval_axis(
    profile: &BumpProfile,
    alpha: [Complex64; 3],
    t: f64,
    x: f64,
    v_max: f64,
    n: usize,
) -> Vec<Complex64> {
    let c = PARSEVAL_CONTOUR;
    let h = 2.0 * v_max / (n - 1) as f64;
    let ln_x_over_pi = (x / PI).ln();
    // The Mellin factor runs along one vertical line, so one rule serves
    // every node: f̂(−1−c+iu) = Σ w_k f(y_k) y_k^{−2−c} e^{iu·ln y_k}.
    // Uniform trapezoid: the integrand vanishes to all orders at the
    // support endpoints, so every Euler-Maclaurin boundary term is zero and
    // the rule converges superalgebraically; Gauss panels stall near 1e-7
    // on this class of integrands.
    let (slo, shi) = profile.support();
    let cycles = (t.abs() + v_max) * (shi / slo).ln() / TAU;
    let nq = 300.max((16.0 * cycles).ceil() as usize);
    let hq = (shi - slo) / nq as f64;
    let mut mweights = Vec::with_capacity(nq + 1);
    let mut mlogs = Vec::with_capacity(nq + 1);
    for k in 0..=nq {
        let y = slo + hq * k as f64;
        let w = if k == 0 || k == nq { 0.5 * hq } else { hq };
        mweights.push(w * profile.eval(y) * y.powf(-2.0 - c));
        mlogs.push(y.ln());
    }

    let mut axis = Vec::with_capacity(n);
    for k in 0..n {
        let v = -v_max + h * k as f64;
        let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        let u = t - v;
        let mut mhat = Complex64::new(0.0, 0.0);
        for (q, &mw) in mweights.iter().enumerate() {
            mhat += mw * cis(u * mlogs[q]);
        }
        let mut lg = Complex64::new(0.0, 0.0);
        for a in alpha {
            lg += log_gamma((Complex64::new(c, v) + a) / 2.0);
        }
        axis.push(mhat * Complex64::from_polar(w * lg.re.exp(), lg.im + v * ln_x_over_pi));
    }
    axis
}

/// Double sum over the two contour axes with the coupling 1/Γ((u₁+u₂)/2).
/// Both axes share one uniform grid, so v_i + v_j only takes 2n−1 values:
/// the double sum collapses to a convolution of the axis sequences followed
/// by one coupling evaluation per diagonal.
fn parseval_pair_sum(a: &[Complex64], b: &[Complex64], v_max: f64) -> Complex64 {
    let c = PARSEVAL_CONTOUR;
    let n = a.len();
    let h = 2.0 * v_max / (n - 1) as f64;
    // No magnitude cutoff here: the reciprocal-gamma coupling grows like
    // e^{pi|s|/2} along the far diagonals, so axis entries many orders of
    // magnitude below the axis peak still carry the dominant contribution.
    let mut conv = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            conv[i + j] += ai * bj;
        }
    }
    // The diagonal entries can sit near 1e-220 with the coupling restoring
    // them by e^{pi|s|/2}, so no entry is negligible by its own magnitude
    // (and norm_sqr would underflow long before the entry itself does).
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, &ck) in conv.iter().enumerate() {
        let s = -v_max + 0.5 * h * k as f64;
        let coup = log_gamma(Complex64::new(c, s));
        sum += ck * Complex64::from_polar((-coup.re).exp(), -coup.im);
    }
    sum
}

/// Squared spectral pairing |I(p)|² of the test function against the
/// normalized Whittaker function, through the shifted-contour Parseval
/// double integral.
///
/// The value is for the bare product f(X₁y₁)f(X₂y₂)y₁^{it₁}y₂^{it₂}; the
/// (R₁R₂(R₁+R₂))^{1/2} normalization of F enters squared on both sides of
/// the summation formula and is applied by the assembly layer, not here.
pub fn spectral_weight(
    spec: &TestFunctionSpec,
    p: &SpectralParams,
    tol: f64,
) -> Result<f64, TransformError> {
    if !p.is_unitary() {
        return Err(precondition("spectral parameters must be unitary"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(precondition("tolerance must be positive"));
    }
    let c = PARSEVAL_CONTOUR;
    let theta = p.theta();
    if theta >= c {
        return Err(precondition(
            "spectral parameters exceed the self-duality window",
        ));
    }
    let alpha = p.alpha();
    let neg = [-alpha[0], -alpha[1], -alpha[2]];
    let max_im = alpha.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
    let v_max = max_im + PARSEVAL_WINDOW_MARGIN;
    let (t1, t2) = (spec.t1(), spec.t2());
    // Trapezoid step: the integrand is analytic in a strip of half-width
    // c − θ around the contour (nearest Γ-pole) and oscillates through the
    // (X/π)^{iv} phase and the Γ phases, whose slope grows like ln(v/2).
    let rate = (spec.x1.max(spec.x2) / PI).ln().abs() + (1.0 + 0.5 * v_max).ln() + 1.0;
    let h_osc = TAU / (8.0 * rate);
    let h_pole = TAU * (c - theta) / (1.4 * (30.0 / tol.min(1e-2)).ln());
    let mut h = h_osc.min(h_pole).min(0.35);

    let mut rel = f64::INFINITY;
    let mut s_fine = Complex64::new(0.0, 0.0);
    for _ in 0..3 {
        let run = |step: f64| {
            let n = ((2.0 * v_max / step).ceil() as usize).max(24) + 1;
            let ax1 = parseval_axis(&spec.profile, alpha, t1, spec.x1, v_max, n);
            let ax2 = parseval_axis(&spec.profile, neg, t2, spec.x2, v_max, n);
            parseval_pair_sum(&ax1, &ax2, v_max)
        };
        s_fine = run(h);
        let s_coarse = run(1.4 * h);
        let denom = s_fine.norm().max(f64::MIN_POSITIVE);
        rel = (s_fine - s_coarse).norm() / denom;
        if rel.is_finite() && rel <= tol {
            break;
        }
        h /= 1.7;
    }
    if !rel.is_finite() || rel > tol {
        return Err(TransformError::NonConvergent { err: rel, tol });
    }

    // Remaining prefactor of the Parseval form. A unimodular X₁^{-it₁}X₂^{-it₂}
    // is dropped: it cancels in the squared modulus.
    let pref = PI.powf(1.5 - 2.0 * c) * spec.x1.powf(1.0 + c) * spec.x2.powf(1.0 + c)
        / (16.0 * PI * PI * imag_gamma_norm(p));
    Ok((s_fine * pref).norm_sqr())
}

/// Closed-form large-parameter asymptotic of the squared spectral pairing,
/// (2π)³/(3³|ν₀ν₁ν₂|) · |f̂(−1+it₁−ν₁−2ν₂) f̂(−1+it₂−2ν₁−ν₂)|².
pub fn spectral_weight_asymptotic(
    spec: &TestFunctionSpec,
    p: &SpectralParams,
) -> Result<f64, TransformError> {
    if spec.x1 != 1.0 || spec.x2 != 1.0 {
        return Err(precondition("asymptotic form requires X1 = X2 = 1"));
    }
    if spec.tau1 < 10.0 || spec.tau2 < 10.0 {
        return Err(precondition("asymptotic form requires tau1, tau2 >= 10"));
    }
    if p.nu1.re.abs() > 1e-6 || p.nu2.re.abs() > 1e-6 {
        return Err(precondition("asymptotic form requires tempered parameters"));
    }
    if (p.nu1.im - spec.tau1).abs() > 5.0 || (p.nu2.im - spec.tau2).abs() > 5.0 {
        return Err(precondition(
            "asymptotic form is only valid near the bump center (iτ₁, iτ₂)",
        ));
    }
    let prod = (p.nu0() * p.nu1 * p.nu2).norm();
    if prod < 1e-9 {
        return Err(precondition("degenerate spectral parameters"));
    }
    let a1 = Complex64::new(-1.0, spec.t1()) - (p.nu1 + 2.0 * p.nu2);
    let a2 = Complex64::new(-1.0, spec.t2()) - (2.0 * p.nu1 + p.nu2);
    let m1 = spec.profile.mellin(a1).norm();
    let m2 = spec.profile.mellin(a2).norm();
    Ok((TAU).powi(3) / (27.0 * prod) * (m1 * m2).powi(2))
}

/// The X-scaling exponent the squared pairing must follow for exceptional
/// parameters: 2(1 + |ρ|).
pub fn exceptional_predicted_exponent(rho: f64) -> f64 {
    2.0 * (1.0 + rho.abs())
}

/// Outcome of the non-tempered X-scaling audit.
#[derive(Debug, Clone)]
pub struct ExceptionalAudit {
    /// (X, weight) samples along the geometric grid.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of ln(weight) against ln(X).
    pub fitted_exponent: f64,
    /// 2(1 + |ρ|).
    pub predicted_exponent: f64,
}

/// Measures the squared pairing along a geometric grid in X₂ and fits the
/// growth exponent, which for exceptional parameters (ρ, γ) must track
/// 2(1 + |ρ|).
pub fn exceptional_weight_check(
    spec: &TestFunctionSpec,
    p: &SpectralParams,
    xs: &[f64],
    tol: f64,
) -> Result<ExceptionalAudit, TransformError> {
    let (rho, gamma) = match p.classify() {
        SpectralClass::Exceptional { rho, gamma } => (rho, gamma),
        _ => return Err(precondition("exceptional spectral parameters required")),
    };
    if rho.abs() < 0.05 {
        return Err(precondition(
            "|rho| >= 0.05 required to resolve the scaling exponent",
        ));
    }
    if gamma.abs() < 3.0 {
        return Err(precondition("gamma >= 3 required"));
    }
    if (gamma.abs() - spec.tau2).abs() > 2.5 || spec.tau1 > 2.5 {
        return Err(precondition(
            "tau must track the exceptional parameter: |γ − τ₂| small, τ₁ small",
        ));
    }
    if xs.len() < 2 || xs[0] < 1.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(precondition(
            "need an increasing grid of at least two X values, all >= 1",
        ));
    }
    let mut samples = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut s = *spec;
        s.x2 = x;
        samples.push((x, spectral_weight(&s, p, tol)?));
    }
    // Least squares for ln w = slope · ln X + intercept.
    let n = samples.len() as f64;
    let (mut su, mut sv, mut suu, mut suv) = (0.0, 0.0, 0.0, 0.0);
    for &(x, w) in &samples {
        if w <= 0.0 {
            return Err(precondition("vanishing weight on the audit grid"));
        }
        let (u, v) = (x.ln(), w.ln());
        su += u;
        sv += v;
        suu += u * u;
        suv += u * v;
    }
    let fitted = (n * suv - su * sv) / (n * suu - su * su);
    Ok(ExceptionalAudit {
        samples,
        fitted_exponent: fitted,
        predicted_exponent: exceptional_predicted_exponent(rho),
    })
}

// ---------------------------------------------------------------------------
// Arithmetic side: oscillatory kernels.
// ---------------------------------------------------------------------------

struct GlAxis {
    x: Vec<f64>,
    w: Vec<f64>,
}

fn composite_axis(lo: f64, hi: f64, panels: usize, per_panel: usize) -> GlAxis {
    let (gn, gw) = gauss_legendre(per_panel);
    let half = 0.5 * (hi - lo) / panels as f64;
    let n = panels * per_panel;
    let mut axis = GlAxis {
        x: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
    };
    for p in 0..panels {
        let mid = lo + (2 * p + 1) as f64 * half;
        for (k, &node) in gn.iter().enumerate() {
            axis.x.push(mid + half * node);
            axis.w.push(gw[k] * half);
        }
    }
    axis
}

/// Inner y-axis: composite Gauss-Legendre with roughly `n` nodes, split
/// into panels of at most 24 so the node count can grow without pushing
/// the rule order up.
fn inner_axis(lo: f64, hi: f64, n: usize) -> GlAxis {
    let panels = n.div_ceil(24).max(1);
    composite_axis(lo, hi, panels, n.div_ceil(panels).max(4))
}

fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

fn panels_for(cycles: f64, cap: usize) -> usize {
    (((cycles / 2.0).ceil() as usize) + 2).clamp(3, cap)
}

fn inner_nodes(cycles: f64, floor: usize, cap: usize) -> usize {
    (floor + (2.6 * cycles).ceil() as usize).clamp(floor, cap)
}

const MAX_REFINE: usize = 3;

/// Support geometry of the intermediate-element kernel. All windows come
/// from requiring the four bump factors to overlap; they are exact, not
/// order-of-magnitude truncations.
struct JtGeometry {
    /// Window for ρ₁ = √ξ₂/ξ₁ forced by f(X₁ y₂ ρ₁).
    w1: (f64, f64),
    /// Window for ρ₂ = √ξ₁/ξ₂ forced by f(X₂ (A/(y₁y₂)) ρ₂).
    w2: (f64, f64),
    bx1: f64,
    bx2: f64,
    y1: (f64, f64),
    y2: (f64, f64),
    xi2_inf: f64,
}

fn jtilde_geometry(spec: &TestFunctionSpec, a: f64) -> Option<JtGeometry> {
    let (slo, shi) = spec.profile.support();
    let (x1, x2) = (spec.x1, spec.x2);
    let l1 = slo * x2 / (shi * x1);
    let u1 = shi * x2 / (slo * x1);
    let l2 = slo.powi(3) / (a * a * x1 * x2 * x2);
    let u2 = shi.powi(3) / (a * a * x1 * x2 * x2);
    // The (ρ₁, ρ₂) pairs realized by the integrand satisfy ξ₁ ≥ 1 and
    // ξ₂ ≥ ξ₁, i.e. ρ₁²ρ₂ ≤ 1 and ρ₁ ≥ ρ₂. Both constraints relax as ρ₂
    // shrinks, so the support is nonempty exactly when they hold at
    // ρ₂ = l2 for some ρ₁ in its window.
    if l2 >= u1 || l1.max(l2).powi(2) * l2 >= 1.0 {
        return None;
    }
    let xi1_sup = (l1 * l1 * l2).powf(-2.0 / 3.0);
    let xi2_sup = (l1 * l2 * l2).powf(-2.0 / 3.0);
    let xi1_inf = (u1 * u1 * u2).powf(-2.0 / 3.0).max(1.0);
    let xi2_inf = (u1 * u2 * u2).powf(-2.0 / 3.0).max(1.0);
    Some(JtGeometry {
        w1: (l1, u1),
        w2: (l2, u2),
        bx1: (xi1_sup - 1.0).sqrt(),
        bx2: (xi2_sup - xi1_inf).max(0.0).sqrt(),
        y1: (slo / (x1 * a), shi / (x1 * a)),
        y2: (slo / x2, shi / x2),
        xi2_inf,
    })
}

struct JtPlan {
    n1: usize,
    n2: usize,
    px1: usize,
    px2: usize,
}

fn jtilde_plan(spec: &TestFunctionSpec, a: f64, g: &JtGeometry) -> JtPlan {
    let (slo, shi) = spec.profile.support();
    let (t1, t2) = (spec.t1(), spec.t2());
    let (x1, x2) = (spec.x1, spec.x2);
    let span = shi - slo;
    let ln_ratio = (shi / slo).ln();
    // Oscillation budget of the τ-powers inside the support band: the two
    // ratio logs only sweep 2·ln(shi/slo) and 3·ln(shi/slo) there.
    let cyc_pow = (2.0 * t1.abs() + 3.0 * t2.abs()) * ln_ratio / TAU;
    // Phase coefficient sups over the truncated box.
    let sup_invz = x1 * x2 * a / (slo * slo);
    let ph3_sup = a * g.bx2 / g.xi2_inf * sup_invz;
    let cx1 = cyc_pow
        + 2.0 * shi * g.bx1 / (x1 * TAU)
        + (shi / x2) * g.bx2 / TAU
        + 2.0 * ph3_sup / TAU;
    let cx2 = cyc_pow + (shi / x2) * g.bx2 / TAU + 2.0 * ph3_sup / TAU;
    let cy1 = (t1 + t2).abs() * ln_ratio / TAU
        + g.bx1 * span / (x1 * TAU)
        + (a * g.bx2 / g.xi2_inf) * (x1 * a * span / (slo * shi)) * (x2 / slo) / TAU;
    let cy2 = (t1 - 2.0 * t2).abs() * ln_ratio / TAU
        + 0.5 * g.bx2 * span / (x2 * TAU)
        + (a * g.bx2 / g.xi2_inf) * sup_invz * span / (slo * TAU);
    JtPlan {
        n1: inner_nodes(cy1, 14, 64),
        n2: inner_nodes(cy2, 14, 64),
        px1: panels_for(cx1, 26),
        px2: panels_for(cx2, 26),
    }
}

/// One tensor pass of the intermediate-element kernel at a fixed grid
/// density. Returns the weighted sum, the accumulated absolute mass (for a
/// cancellation-aware convergence floor), and the evaluation count.
fn jtilde_pass(
    q: &KernelQuery,
    a: f64,
    g: &JtGeometry,
    plan: &JtPlan,
    per_panel: usize,
) -> (Complex64, f64, u64) {
    let spec = &q.spec;
    let profile = spec.profile;
    let (slo, shi) = profile.support();
    let (t1, t2) = (spec.t1(), spec.t2());
    let (x1f, x2f) = (spec.x1, spec.x2);
    let eps = q.eps1.as_f64();

    let y1 = inner_axis(g.y1.0, g.y1.1, plan.n1);
    let y2 = inner_axis(g.y2.0, g.y2.1, plan.n2);
    let n1 = y1.x.len();
    let n2 = y2.x.len();

    // Node data independent of the outer point. Measure dy₁dy₂/(y₁y₂²).
    let mut row_base = vec![Complex64::new(0.0, 0.0); n1];
    let mut invy1 = vec![0.0; n1];
    for i in 0..n1 {
        let y = y1.x[i];
        invy1[i] = 1.0 / y;
        let f = profile.eval(x1f * a * y);
        if f > 0.0 {
            row_base[i] = Complex64::from_polar(
                y1.w[i] / y * f,
                -t1 * (a * y).ln() - t2 * y.ln(),
            );
        }
    }
    let mut col_base = vec![Complex64::new(0.0, 0.0); n2];
    let mut invy2 = vec![0.0; n2];
    for j in 0..n2 {
        let y = y2.x[j];
        invy2[j] = 1.0 / y;
        let f = profile.eval(x2f * y);
        if f > 0.0 {
            col_base[j] = Complex64::from_polar(
                y2.w[j] / (y * y) * f,
                (t1 - 2.0 * t2) * y.ln(),
            );
        }
    }

    let ax1 = composite_axis(-g.bx1, g.bx1, plan.px1, per_panel);
    let ax2 = composite_axis(-g.bx2, g.bx2, plan.px2, per_panel);

    let rows: Vec<(Complex64, f64, u64)> = (0..ax1.x.len())
        .into_par_iter()
        .map(|i| {
            let x1v = ax1.x[i];
            let wx1 = ax1.w[i];
            let xi1 = x1v * x1v + 1.0;
            // e(−εA x₁ y₁) is the only x₂-independent y-phase; hoist it.
            let row_i: Vec<Complex64> = (0..n1)
                .map(|k| {
                    if row_base[k].norm_sqr() == 0.0 {
                        row_base[k]
                    } else {
                        row_base[k] * cis(-TAU * eps * a * x1v * y1.x[k])
                    }
                })
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mass = 0.0;
            let mut evals = 0u64;
            for j in 0..ax2.x.len() {
                let x2v = ax2.x[j];
                let xi2 = xi1 + x2v * x2v;
                let rho1 = xi2.sqrt() / xi1;
                if rho1 < g.w1.0 || rho1 > g.w1.1 {
                    continue;
                }
                let rho2 = xi1.sqrt() / xi2;
                if rho2 < g.w2.0 || rho2 > g.w2.1 {
                    continue;
                }
                // f(X₂·A·ρ₂/z) confines 1/z to an interval; pairs outside
                // contribute nothing and are skipped before any exp.
                let iz_lo = slo / (x2f * a * rho2);
                let iz_hi = shi / (x2f * a * rho2);
                let ph2 = x1v * x2v / xi1;
                let ph3 = a * x2v / xi2;
                let xscalar = cis(t1 * rho1.ln() + t2 * (a.ln() + rho2.ln()));
                let col: Vec<Complex64> = (0..n2)
                    .map(|k| {
                        if col_base[k].norm_sqr() == 0.0 {
                            return col_base[k];
                        }
                        let f = profile.eval(x1f * rho1 * y2.x[k]);
                        if f == 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            col_base[k] * f * cis(TAU * ph2 * y2.x[k])
                        }
                    })
                    .collect();
                let mut s = Complex64::new(0.0, 0.0);
                for k1 in 0..n1 {
                    let r = row_i[k1];
                    if r.norm_sqr() == 0.0 {
                        continue;
                    }
                    let iv1 = invy1[k1];
                    let mut inner = Complex64::new(0.0, 0.0);
                    for k2 in 0..n2 {
                        let cb = col[k2];
                        if cb.norm_sqr() == 0.0 {
                            continue;
                        }
                        let invz = iv1 * invy2[k2];
                        if invz < iz_lo || invz > iz_hi {
                            continue;
                        }
                        let f = profile.eval(x2f * a * rho2 * invz);
                        evals += 1;
                        if f == 0.0 {
                            continue;
                        }
                        inner += cb * f * cis(TAU * ph3 * invz);
                    }
                    s += r * inner;
                }
                let term = (wx1 * ax2.w[j]) * xscalar * s;
                acc += term;
                mass += term.norm();
            }
            (acc, mass, evals)
        })
        .collect();

    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    let mut evals = 0u64;
    for (s, m, e) in rows {
        sum += s;
        mass += m;
        evals += e;
    }
    (sum, mass, evals)
}

/// Oscillatory kernel attached to the intermediate Weyl element:
///
/// 𝒥̃_ε(A) = A⁻² ∬∬ e(−εAx₁y₁) e(y₂x₁x₂/ξ₁) e((A/(y₁y₂))·x₂/ξ₂)
///          · F(y₂√ξ₂/ξ₁, (A/(y₁y₂))√ξ₁/ξ₂) · conj(F(Ay₁, y₂))
///          dx₁ dx₂ dy₁ dy₂/(y₁y₂²),      ξ₁ = x₁²+1, ξ₂ = x₁²+x₂²+1.
///
/// The bump supports confine (√ξ₂/ξ₁, √ξ₁/ξ₂) to a product window; when
/// that window misses the region realized by real (x₁, x₂) the kernel is
/// identically zero and the result is an exact zero with no evaluations.
pub fn kernel_jtilde(q: &KernelQuery, tol: f64) -> Result<QuadResult, TransformError> {
    let a = match q.amplitude {
        KernelAmplitude::Single(a) => a,
        KernelAmplitude::Pair(..) => {
            return Err(precondition(
                "intermediate-element kernel takes a single amplitude",
            ))
        }
    };
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(precondition("tolerance must be positive"));
    }
    let Some(geom) = jtilde_geometry(&q.spec, a) else {
        return Ok(QuadResult::exact_zero());
    };
    let mut plan = jtilde_plan(&q.spec, a, &geom);
    let scale = q.spec.normalization().powi(2) / (a * a);
    let mut evals_total = 0u64;
    let mut last_err = f64::INFINITY;
    for _ in 0..=MAX_REFINE {
        let (s_fine, mass, e1) = jtilde_pass(q, a, &geom, &plan, 14);
        let (s_coarse, _, e2) = jtilde_pass(q, a, &geom, &plan, 10);
        evals_total += e1 + e2;
        let floor = 1e-10 * mass;
        let denom = s_fine.norm().max(floor).max(f64::MIN_POSITIVE);
        let err = (s_fine - s_coarse).norm() / denom;
        if err <= tol {
            return Ok(QuadResult {
                value: s_fine * scale,
                err_estimate: (s_fine - s_coarse).norm() * scale,
                evaluations: evals_total,
                converged: true,
            });
        }
        last_err = err;
        plan.px1 = (plan.px1 * 8 / 5 + 1).min(64);
        plan.px2 = (plan.px2 * 8 / 5 + 1).min(64);
        plan.n1 = (plan.n1 * 5 / 4 + 2).min(96);
        plan.n2 = (plan.n2 * 5 / 4 + 2).min(96);
    }
    Err(TransformError::NonConvergent { err: last_err, tol })
}

/// Support geometry of the long-element kernel.
struct JGeometry {
    /// Window for ρ₁ = √ξ₁/ξ₂ forced by f(X₁ (A₂/y₂) ρ₁).
    w1: (f64, f64),
    /// Window for ρ₂ = √ξ₂/ξ₁ forced by f(X₂ (A₁/y₁) ρ₂).
    w2: (f64, f64),
    b1: f64,
    b23: f64,
    y1: (f64, f64),
    y2: (f64, f64),
    xi1_inf: f64,
    xi2_inf: f64,
}

fn j_geometry(spec: &TestFunctionSpec, a1: f64, a2: f64) -> Option<JGeometry> {
    let (slo, shi) = spec.profile.support();
    let xx = spec.x1 * spec.x2;
    // Realizable ratios satisfy ξ₁ ≥ 1 and ξ₂ ≥ 1, i.e. ρ₂²ρ₁ ≤ 1 and
    // ρ₁²ρ₂ ≤ 1; both relax toward small ρ, so emptiness is decided at the
    // window minima. This is the exact form of the vanishing law
    // min(A₁A₂², A₂A₁²) ≤ sup-supp-cubed · (X₁X₂)^{−3/2}.
    if (a1 * a2 * a2).min(a2 * a1 * a1) <= slo.powi(3) * xx.powf(-1.5) {
        return None;
    }
    let w1 = (slo * slo / (xx * a2 * a2), shi * shi / (xx * a2 * a2));
    let w2 = (slo * slo / (xx * a1 * a1), shi * shi / (xx * a1 * a1));
    let xi1_sup = (w2.0 * w2.0 * w1.0).powf(-2.0 / 3.0);
    let xi2_sup = (w1.0 * w1.0 * w2.0).powf(-2.0 / 3.0);
    let xi1_inf = (w2.1 * w2.1 * w1.1).powf(-2.0 / 3.0).max(1.0);
    let xi2_inf = (w1.1 * w1.1 * w2.1).powf(-2.0 / 3.0).max(1.0);
    Some(JGeometry {
        w1,
        w2,
        b1: (xi1_sup - 1.0).sqrt(),
        b23: (xi2_sup - 1.0).sqrt(),
        y1: (slo / (spec.x1 * a1), shi / (spec.x1 * a1)),
        y2: (slo / (spec.x2 * a2), shi / (spec.x2 * a2)),
        xi1_inf,
        xi2_inf,
    })
}

struct JPlan {
    n1: usize,
    n2: usize,
    px: [usize; 3],
}

fn j_plan(spec: &TestFunctionSpec, a1: f64, a2: f64, g: &JGeometry) -> JPlan {
    let (slo, shi) = spec.profile.support();
    let (t1, t2) = (spec.t1(), spec.t2());
    let (x1, x2) = (spec.x1, spec.x2);
    let span = shi - slo;
    let ln_ratio = (shi / slo).ln();
    let cyc_pow = (t1.abs() + t2.abs()) * 2.0 * ln_ratio / TAU;
    let sup_phi1 = g.b23 / g.xi1_inf.sqrt() + g.b1 / g.xi1_inf;
    let sup_phi2 = (g.b1 + 1.0) / g.xi2_inf.sqrt();
    let c1 = x1 * a1 * a1; // sup of A₁/y₁
    let c2 = x2 * a2 * a2; // sup of A₂/y₂
    let cx1 = cyc_pow
        + 2.0 * shi * g.b1 / (x1 * TAU)
        + 2.0 * c1 * sup_phi1 / TAU
        + 2.0 * c2 * g.b1 / (g.xi2_inf.sqrt() * TAU);
    let cx2 = cyc_pow
        + 2.0 * shi * g.b23 / (x2 * TAU)
        + 2.0 * c2 * sup_phi2 / TAU
        + 2.0 * c1 * sup_phi1 / TAU;
    let cx3 = cyc_pow + 2.0 * c2 * sup_phi2 / TAU + 2.0 * c1 * sup_phi1 / TAU;
    let cy1 = (t1 + t2).abs() * ln_ratio / TAU
        + g.b1 * span / (x1 * TAU)
        + a1 * sup_phi1 * (x1 * a1 * span / (slo * shi)) / TAU;
    let cy2 = (t1 + t2).abs() * ln_ratio / TAU
        + g.b23 * span / (x2 * TAU)
        + a2 * sup_phi2 * (x2 * a2 * span / (slo * shi)) / TAU;
    JPlan {
        n1: inner_nodes(cy1, 12, 96),
        n2: inner_nodes(cy2, 12, 96),
        px: [
            panels_for(cx1, 24),
            panels_for(cx2, 24),
            panels_for(cx3, 24),
        ],
    }
}

/// Shared y-axis data for one long-element pass: the y-dependence of the
/// integrand factorizes, so each outer point costs two inner sums instead
/// of a double sum.
struct JAxes {
    y1: GlAxis,
    y2: GlAxis,
    row_base: Vec<Complex64>,
    col_base: Vec<Complex64>,
    invy1: Vec<f64>,
    invy2: Vec<f64>,
}

fn j_axes(spec: &TestFunctionSpec, a1: f64, a2: f64, g: &JGeometry, plan: &JPlan) -> JAxes {
    let profile = spec.profile;
    let (t1, t2) = (spec.t1(), spec.t2());
    let y1 = inner_axis(g.y1.0, g.y1.1, plan.n1);
    let y2 = inner_axis(g.y2.0, g.y2.1, plan.n2);
    let n1 = y1.x.len();
    let n2 = y2.x.len();
    let mut row_base = vec![Complex64::new(0.0, 0.0); n1];
    let mut invy1 = vec![0.0; n1];
    for i in 0..n1 {
        let y = y1.x[i];
        invy1[i] = 1.0 / y;
        let f = profile.eval(spec.x1 * a1 * y);
        if f > 0.0 {
            // Powers carried by y₁: (A₁y₁)^{−it₁} from the conjugate factor
            // and (A₁/y₁)^{it₂} from the second slot of the forward factor.
            row_base[i] = Complex64::from_polar(
                y1.w[i] / y * f,
                -t1 * (a1 * y).ln() + t2 * (a1 / y).ln(),
            );
        }
    }
    let mut col_base = vec![Complex64::new(0.0, 0.0); n2];
    let mut invy2 = vec![0.0; n2];
    for j in 0..n2 {
        let y = y2.x[j];
        invy2[j] = 1.0 / y;
        let f = profile.eval(spec.x2 * a2 * y);
        if f > 0.0 {
            col_base[j] = Complex64::from_polar(
                y2.w[j] / y * f,
                -t2 * (a2 * y).ln() + t1 * (a2 / y).ln(),
            );
        }
    }
    JAxes {
        y1,
        y2,
        row_base,
        col_base,
        invy1,
        invy2,
    }
}

fn j_pass(
    q: &KernelQuery,
    a1: f64,
    a2: f64,
    g: &JGeometry,
    plan: &JPlan,
    per_panel: usize,
) -> (Complex64, f64, u64) {
    let spec = &q.spec;
    let profile = spec.profile;
    let (t1, t2) = (spec.t1(), spec.t2());
    let (x1f, x2f) = (spec.x1, spec.x2);
    let (e1, e2) = (q.eps1.as_f64(), q.eps2.as_f64());
    let axes = j_axes(spec, a1, a2, g, plan);
    let n1 = axes.y1.x.len();
    let n2 = axes.y2.x.len();

    let ax1 = composite_axis(-g.b1, g.b1, plan.px[0], per_panel);
    let ax2 = composite_axis(-g.b23, g.b23, plan.px[1], per_panel);
    let ax3 = composite_axis(-g.b23, g.b23, plan.px[2], per_panel);

    let rows: Vec<(Complex64, f64, u64)> = (0..ax1.x.len())
        .into_par_iter()
        .map(|i| {
            let x1v = ax1.x[i];
            let wx1 = ax1.w[i];
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mass = 0.0;
            let mut evals = 0u64;
            for j in 0..ax2.x.len() {
                let x2v = ax2.x[j];
                let wx12 = wx1 * ax2.w[j];
                let q3_base = x1v * x2v;
                for k in 0..ax3.x.len() {
                    let x3v = ax3.x[k];
                    let q3 = q3_base - x3v;
                    let xi1 = q3 * q3 + x1v * x1v + 1.0;
                    let xi2 = x3v * x3v + x2v * x2v + 1.0;
                    let rho1 = xi1.sqrt() / xi2;
                    if rho1 < g.w1.0 || rho1 > g.w1.1 {
                        continue;
                    }
                    let rho2 = xi2.sqrt() / xi1;
                    if rho2 < g.w2.0 || rho2 > g.w2.1 {
                        continue;
                    }
                    let phi1 = (x2v * q3 + x1v) / xi1;
                    let phi2 = (x1v * x3v + x2v) / xi2;
                    let mut rowsum = Complex64::new(0.0, 0.0);
                    for k1 in 0..n1 {
                        let rb = axes.row_base[k1];
                        if rb.norm_sqr() == 0.0 {
                            continue;
                        }
                        let f = profile.eval(x2f * a1 * axes.invy1[k1] * rho2);
                        if f == 0.0 {
                            continue;
                        }
                        evals += 1;
                        rowsum += rb
                            * f
                            * cis(-TAU
                                * (e1 * a1 * x1v * axes.y1.x[k1]
                                    + a1 * phi1 * axes.invy1[k1]));
                    }
                    if rowsum.norm_sqr() == 0.0 {
                        continue;
                    }
                    let mut colsum = Complex64::new(0.0, 0.0);
                    for k2 in 0..n2 {
                        let cb = axes.col_base[k2];
                        if cb.norm_sqr() == 0.0 {
                            continue;
                        }
                        let f = profile.eval(x1f * a2 * axes.invy2[k2] * rho1);
                        if f == 0.0 {
                            continue;
                        }
                        evals += 1;
                        colsum += cb
                            * f
                            * cis(-TAU
                                * (e2 * a2 * x2v * axes.y2.x[k2]
                                    + a2 * phi2 * axes.invy2[k2]));
                    }
                    let scal = cis(t1 * rho1.ln() + t2 * rho2.ln());
                    let term = (wx12 * ax3.w[k]) * scal * rowsum * colsum;
                    acc += term;
                    mass += term.norm();
                }
            }
            (acc, mass, evals)
        })
        .collect();

    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    let mut evals = 0u64;
    for (s, m, e) in rows {
        sum += s;
        mass += m;
        evals += e;
    }
    (sum, mass, evals)
}

/// Oscillatory kernel attached to the long Weyl element:
///
/// 𝒥_{ε₁,ε₂}(A₁,A₂) = (A₁A₂)⁻² ∫⁵ e(−ε₁A₁x₁y₁ − ε₂A₂x₂y₂)
///   · e(−(A₂/y₂)(x₁x₃+x₂)/ξ₂) · e(−(A₁/y₁)(x₂(x₁x₂−x₃)+x₁)/ξ₁)
///   · conj(F(A₁y₁, A₂y₂)) · F((A₂/y₂)√ξ₁/ξ₂, (A₁/y₁)√ξ₂/ξ₁)
///   dx dy/(y₁y₂),   ξ₁ = (x₁x₂−x₃)²+x₁²+1,  ξ₂ = x₃²+x₂²+1.
///
/// Returns an exact zero with no evaluations whenever the support windows
/// are incompatible, which happens exactly when min(A₁A₂², A₂A₁²) ≤
/// (X₁X₂)^{−3/2} for the standard profile.
pub fn kernel_j(q: &KernelQuery, tol: f64) -> Result<QuadResult, TransformError> {
    let (a1, a2) = match q.amplitude {
        KernelAmplitude::Pair(a1, a2) => (a1, a2),
        KernelAmplitude::Single(_) => {
            return Err(precondition("long-element kernel takes an amplitude pair"))
        }
    };
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(precondition("tolerance must be positive"));
    }
    let Some(geom) = j_geometry(&q.spec, a1, a2) else {
        return Ok(QuadResult::exact_zero());
    };
    let mut plan = j_plan(&q.spec, a1, a2, &geom);
    let scale = q.spec.normalization().powi(2) / (a1 * a1 * a2 * a2);
    let mut evals_total = 0u64;
    let mut last_err = f64::INFINITY;
    for _ in 0..=MAX_REFINE {
        let (s_fine, mass, e1) = j_pass(q, a1, a2, &geom, &plan, 14);
        let (s_coarse, _, e2) = j_pass(q, a1, a2, &geom, &plan, 10);
        evals_total += e1 + e2;
        let floor = 1e-10 * mass;
        let denom = s_fine.norm().max(floor).max(f64::MIN_POSITIVE);
        let err = (s_fine - s_coarse).norm() / denom;
        if err <= tol {
            return Ok(QuadResult {
                value: s_fine * scale,
                err_estimate: (s_fine - s_coarse).norm() * scale,
                evaluations: evals_total,
                converged: true,
            });
        }
        last_err = err;
        for p in plan.px.iter_mut() {
            *p = (*p * 8 / 5 + 1).min(48);
        }
        plan.n1 = (plan.n1 * 5 / 4 + 2).min(128);
        plan.n2 = (plan.n2 * 5 / 4 + 2).min(128);
    }
    Err(TransformError::NonConvergent { err: last_err, tol })
}

// ---------------------------------------------------------------------------
// Tau-integrated long-element kernel.
// ---------------------------------------------------------------------------

/// Cubic-Hermite table of ĝ(w) = ∫ g(t) e^{iwt} dt on a uniform grid; the
/// derivative ĝ'(w) = i∫ t g(t) e^{iwt} dt is tabulated alongside so the
/// interpolation error stays at the h⁴ scale.
struct FourierTable {
    w0: f64,
    step: f64,
    val: Vec<Complex64>,
    der: Vec<Complex64>,
}

impl FourierTable {
    fn build(g: &BumpProfile, w_lo: f64, w_hi: f64) -> Self {
        let step = 0.08;
        let w0 = w_lo - 2.0 * step;
        let n = ((w_hi - w0) / step).ceil() as usize + 3;
        let (slo, shi) = g.support();
        let w_abs = w0.abs().max((w0 + step * n as f64).abs());
        let cycles = w_abs * (shi - slo) / TAU;
        let panels = ((cycles / 2.0).ceil() as usize + 2).max(4);
        let axis = composite_axis(slo, shi, panels, 18);
        let gv: Vec<f64> = axis.x.iter().map(|&t| g.eval(t)).collect();
        let mut val = Vec::with_capacity(n);
        let mut der = Vec::with_capacity(n);
        for k in 0..n {
            let w = w0 + step * k as f64;
            let mut v = Complex64::new(0.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            for (idx, &t) in axis.x.iter().enumerate() {
                let ph = cis(w * t) * (axis.w[idx] * gv[idx]);
                v += ph;
                d += ph * Complex64::new(0.0, t);
            }
            val.push(v);
            der.push(d);
        }
        FourierTable { w0, step, val, der }
    }

    fn eval(&self, w: f64) -> Complex64 {
        let s = (w - self.w0) / self.step;
        let i = (s.floor() as isize).clamp(0, self.val.len() as isize - 2) as usize;
        let u = s - i as f64;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        self.val[i] * h00
            + self.der[i] * (h10 * self.step)
            + self.val[i + 1] * h01
            + self.der[i + 1] * (h11 * self.step)
    }
}

fn tau_int_plan(
    spec: &TestFunctionSpec,
    a1: f64,
    a2: f64,
    r1: f64,
    r2: f64,
    g: &JGeometry,
) -> JPlan {
    let (slo, shi) = spec.profile.support();
    let (x1, x2) = (spec.x1, spec.x2);
    let span = shi - slo;
    let ln_ratio = (shi / slo).ln();
    // The tau-weight transforms oscillate like e^{i·w·t̄} with t̄ inside the
    // support of g. Their arguments are R·(log-ratio phases), and each of
    // the three log ratios only sweeps a 2·ln(shi/slo) window wherever the
    // integrand is nonzero, so the total phase budget is bounded by the
    // window widths, not by the axis spans.
    let tbar = shi;
    let cyc_g = tbar * r1.max(r2) * 6.0 * ln_ratio / TAU;
    let sup_phi1 = g.b23 / g.xi1_inf.sqrt() + g.b1 / g.xi1_inf;
    let sup_phi2 = (g.b1 + 1.0) / g.xi2_inf.sqrt();
    let c1 = x1 * a1 * a1;
    let c2 = x2 * a2 * a2;
    let cx1 = cyc_g + 2.0 * shi * g.b1 / (x1 * TAU) + 2.0 * c1 * sup_phi1 / TAU;
    let cx2 = cyc_g + 2.0 * shi * g.b23 / (x2 * TAU) + 2.0 * c2 * sup_phi2 / TAU;
    let cx3 = cyc_g + 2.0 * (c1 * sup_phi1 + c2 * sup_phi2) / TAU;
    let cy = tbar * r1.max(r2) * 6.0 * ln_ratio / TAU
        + (g.b1 / x1 + g.b23 / x2) * span / TAU
        + (a1 * sup_phi1 * x1 * a1 + a2 * sup_phi2 * x2 * a2) * span / (slo * shi * TAU);
    // Trapezoid nodes on the shared log grid; both axes must agree so the
    // convolution index k1+k2 maps onto one z-grid.
    let ny = (24 + (8.0 * cy).ceil() as usize).min(240);
    JPlan {
        n1: ny,
        n2: ny,
        px: [
            panels_for(cx1, 20),
            panels_for(cx2, 20),
            panels_for(cx3, 20),
        ],
    }
}

fn tau_int_pass(
    q: &KernelQuery,
    a1: f64,
    a2: f64,
    tab: &FourierTable,
    r1: f64,
    r2: f64,
    g: &JGeometry,
    plan: &JPlan,
    per_panel: usize,
) -> (Complex64, f64, u64) {
    let spec = &q.spec;
    let profile = spec.profile;
    let (x1f, x2f) = (spec.x1, spec.x2);
    let (slo, shi) = profile.support();
    let (e1, e2) = (q.eps1.as_f64(), q.eps2.as_f64());
    // Both tau-weight arguments depend on (y₁,y₂) only through z = y₁y₂, so
    // the inner double integral is a multiplicative convolution against the
    // two weight tables. Uniform log-spaced grids with a shared step make
    // that convolution exact on the index sum k₁+k₂ (the integrands vanish
    // to all orders at the support edges, so the trapezoid rule on these
    // axes converges superalgebraically, as on the spectral side).
    let n1 = plan.n1;
    let n2 = plan.n2;
    let l10 = g.y1.0.ln();
    let l20 = g.y2.0.ln();
    let d = (g.y1.1 / g.y1.0).ln() / (n1 - 1) as f64;
    let build = |l0: f64, n: usize, xa: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut ys = vec![0.0; n];
        let mut inv = vec![0.0; n];
        let mut base = vec![0.0; n];
        for i in 0..n {
            let y = (l0 + d * i as f64).exp();
            let w = if i == 0 || i == n - 1 { 0.5 * d } else { d };
            ys[i] = y;
            inv[i] = 1.0 / y;
            base[i] = w * profile.eval(xa * y);
        }
        (ys, inv, base)
    };
    let (y1, invy1, row_base) = build(l10, n1, x1f * a1);
    let (y2, invy2, col_base) = build(l20, n2, x2f * a2);
    let ln_a_ratio = (a1 / a2).ln();
    let base_l3 = 3.0 * (l10 + l20);
    let d3 = 3.0 * d;
    // Index window on a log grid where c/y stays inside the bump support.
    let window = |c: f64, l0: f64, n: usize| -> (usize, usize) {
        let lo = (c / shi).ln();
        let hi = (c / slo).ln();
        let i0 = ((lo - l0) / d).ceil().max(0.0) as usize;
        let i1 = (((hi - l0) / d).floor() as isize).min(n as isize - 1);
        (i0, i1.max(-1) as usize)
    };

    let ax1 = composite_axis(-g.b1, g.b1, plan.px[0], per_panel);
    let ax2 = composite_axis(-g.b23, g.b23, plan.px[1], per_panel);
    let ax3 = composite_axis(-g.b23, g.b23, plan.px[2], per_panel);

    let rows: Vec<(Complex64, f64, u64)> = (0..ax1.x.len())
        .into_par_iter()
        .map(|i| {
            let x1v = ax1.x[i];
            let wx1 = ax1.w[i];
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mass = 0.0;
            let mut evals = 0u64;
            let mut rowfac = vec![Complex64::new(0.0, 0.0); n1];
            let mut colfac = vec![Complex64::new(0.0, 0.0); n2];
            let mut conv = vec![Complex64::new(0.0, 0.0); n1 + n2 - 1];
            for j in 0..ax2.x.len() {
                let x2v = ax2.x[j];
                let wx12 = wx1 * ax2.w[j];
                for k in 0..ax3.x.len() {
                    let x3v = ax3.x[k];
                    let q3 = x1v * x2v - x3v;
                    let xi1 = q3 * q3 + x1v * x1v + 1.0;
                    let xi2 = x3v * x3v + x2v * x2v + 1.0;
                    let rho1 = xi1.sqrt() / xi2;
                    if rho1 < g.w1.0 || rho1 > g.w1.1 {
                        continue;
                    }
                    let rho2 = xi2.sqrt() / xi1;
                    if rho2 < g.w2.0 || rho2 > g.w2.1 {
                        continue;
                    }
                    let phi1 = (x2v * q3 + x1v) / xi1;
                    let phi2 = (x1v * x3v + x2v) / xi2;
                    let (lr1, lr2) = (rho1.ln(), rho2.ln());
                    let kap1 = ln_a_ratio + lr1 + 2.0 * lr2;
                    let kap2 = -ln_a_ratio + 2.0 * lr1 + lr2;
                    let (ra, rb) = window(x2f * a1 * rho2, l10, n1);
                    if ra > rb || rb == usize::MAX {
                        continue;
                    }
                    let (ca, cb) = window(x1f * a2 * rho1, l20, n2);
                    if ca > cb || cb == usize::MAX {
                        continue;
                    }
                    for k1 in ra..=rb {
                        let f = row_base[k1] * profile.eval(x2f * a1 * invy1[k1] * rho2);
                        rowfac[k1] = cis(-TAU
                            * (e1 * a1 * x1v * y1[k1] + a1 * phi1 * invy1[k1]))
                            * f;
                    }
                    for k2 in ca..=cb {
                        let f = col_base[k2] * profile.eval(x1f * a2 * invy2[k2] * rho1);
                        colfac[k2] = cis(-TAU
                            * (e2 * a2 * x2v * y2[k2] + a2 * phi2 * invy2[k2]))
                            * f;
                    }
                    conv[ra + ca..=rb + cb].fill(Complex64::new(0.0, 0.0));
                    for k1 in ra..=rb {
                        let rf = rowfac[k1];
                        for k2 in ca..=cb {
                            conv[k1 + k2] += rf * colfac[k2];
                        }
                    }
                    let mut s = Complex64::new(0.0, 0.0);
                    for m in ra + ca..=rb + cb {
                        let cm = conv[m];
                        let l = base_l3 + d3 * m as f64;
                        evals += 1;
                        s += cm * tab.eval(r1 * (kap1 - l)) * tab.eval(r2 * (kap2 - l));
                    }
                    let term = (wx12 * ax3.w[k]) * s;
                    acc += term;
                    mass += term.norm();
                }
            }
            (acc, mass, evals)
        })
        .collect();

    let mut sum = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    let mut evals = 0u64;
    for (s, m, e) in rows {
        sum += s;
        mass += m;
        evals += e;
    }
    (sum, mass, evals)
}

/// Long-element kernel integrated against the localized tau-weight
/// g(τ₁/R₁) g(τ₂/R₂) dτ₁ dτ₂.
///
/// The τ-dependence of the kernel sits entirely in two log-linear phases,
/// so the τ-integrals are the transforms R·ĝ(R·φ); they are evaluated here
/// by quadrature once per phase value (memoized on a Hermite grid) and
/// fused into the remaining five-dimensional integral, which is the same
/// integral the pointwise kernel runs. The τ entries of the query's spec
/// are ignored; R₁, R₂ control both the weight and the normalization.
pub fn kernel_j_tau_integrated(
    q: &KernelQuery,
    g: &BumpProfile,
    r1: f64,
    r2: f64,
    tol: f64,
) -> Result<QuadResult, TransformError> {
    let (a1, a2) = match q.amplitude {
        KernelAmplitude::Pair(a1, a2) => (a1, a2),
        KernelAmplitude::Single(_) => {
            return Err(precondition("long-element kernel takes an amplitude pair"))
        }
    };
    if !(r1 >= 10.0 && r2 >= 10.0) {
        return Err(precondition("R1, R2 >= 10 required"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(precondition("tolerance must be positive"));
    }
    let Some(geom) = j_geometry(&q.spec, a1, a2) else {
        return Ok(QuadResult::exact_zero());
    };
    // Interval bounds for the two phase arguments, from the support
    // windows of the ratios and of z = y₁y₂.
    let lr1 = (geom.w1.0.ln(), geom.w1.1.ln());
    let lr2 = (geom.w2.0.ln(), geom.w2.1.ln());
    let (slo, shi) = q.spec.profile.support();
    let z_lo = (slo * slo / (q.spec.x1 * q.spec.x2 * a1 * a2)).ln();
    let z_hi = (shi * shi / (q.spec.x1 * q.spec.x2 * a1 * a2)).ln();
    let lar = (a1 / a2).ln();
    let phi1 = (
        lar + lr1.0 + 2.0 * lr2.0 - 3.0 * z_hi,
        lar + lr1.1 + 2.0 * lr2.1 - 3.0 * z_lo,
    );
    let phi2 = (
        -lar + 2.0 * lr1.0 + lr2.0 - 3.0 * z_hi,
        -lar + 2.0 * lr1.1 + lr2.1 - 3.0 * z_lo,
    );
    let w_lo = (r1 * phi1.0).min(r2 * phi2.0);
    let w_hi = (r1 * phi1.1).max(r2 * phi2.1);
    let tab = FourierTable::build(g, w_lo, w_hi);

    let mut plan = tau_int_plan(&q.spec, a1, a2, r1, r2, &geom);
    let scale = q.spec.normalization().powi(2) * r1 * r2 / (a1 * a1 * a2 * a2);
    let mut evals_total = 0u64;
    let mut last_err = f64::INFINITY;
    for _ in 0..=MAX_REFINE {
        let (s_fine, mass, e1) = tau_int_pass(q, a1, a2, &tab, r1, r2, &geom, &plan, 14);
        let (s_coarse, _, e2) = tau_int_pass(q, a1, a2, &tab, r1, r2, &geom, &plan, 10);
        evals_total += e1 + e2;
        let floor = 1e-10 * mass;
        let denom = s_fine.norm().max(floor).max(f64::MIN_POSITIVE);
        let err = (s_fine - s_coarse).norm() / denom;
        if err <= tol {
            return Ok(QuadResult {
                value: s_fine * scale,
                err_estimate: (s_fine - s_coarse).norm() * scale,
                evaluations: evals_total,
                converged: true,
            });
        }
        last_err = err;
        for p in plan.px.iter_mut() {
            *p = (*p * 8 / 5 + 1).min(40);
        }
        plan.n1 = (plan.n1 * 5 / 4 + 2).min(384);
        plan.n2 = (plan.n2 * 5 / 4 + 2).min(384);
    }
    Err(TransformError::NonConvergent { err: last_err, tol })
}

// ---------------------------------------------------------------------------
// Support-shell volumes.
// ---------------------------------------------------------------------------

/// Region selector for [`lemma4_volume`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeMode {
    /// ξⱼ within a factor 2 of Ξⱼ on both sides.
    Box,
    /// |ξⱼ/Ξⱼ − 1| ≤ 1/(2Rⱼ).
    Shell { r1: f64, r2: f64 },
}

/// Monte-Carlo volume estimate with its sampling error.
#[derive(Debug, Clone, Copy)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
}

/// Monte-Carlo volume of {(x₁,x₂,x₃) : ξ₁ ≈ Ξ₁, ξ₂ ≈ Ξ₂} where
/// ξ₁ = (x₁x₂−x₃)² + x₁² + 1 and ξ₂ = x₃² + x₂² + 1, with the tolerance of
/// "≈" selected by the mode. The stream is seeded internally, so equal
/// arguments give bitwise-equal estimates.
pub fn lemma4_volume(
    xi1: f64,
    xi2: f64,
    mode: VolumeMode,
    samples: u64,
) -> Result<VolumeEstimate, TransformError> {
    if !(xi1 >= 1.0 && xi2 >= 1.0) {
        return Err(precondition("Xi1, Xi2 must be >= 1"));
    }
    if samples < 10_000 {
        return Err(precondition("at least 1e4 samples required"));
    }
    let (lo1, hi1, lo2, hi2) = match mode {
        VolumeMode::Box => (0.5 * xi1, 2.0 * xi1, 0.5 * xi2, 2.0 * xi2),
        VolumeMode::Shell { r1, r2 } => {
            if !(r1 >= 1.0 && r2 >= 1.0) {
                return Err(precondition("shell widths need R1, R2 >= 1"));
            }
            (
                xi1 * (1.0 - 0.5 / r1),
                xi1 * (1.0 + 0.5 / r1),
                xi2 * (1.0 - 0.5 / r2),
                xi2 * (1.0 + 0.5 / r2),
            )
        }
    };
    let b1 = (hi1 - 1.0).max(0.0).sqrt();
    let b23 = (hi2 - 1.0).max(0.0).sqrt();
    if b1 == 0.0 || b23 == 0.0 {
        return Ok(VolumeEstimate {
            volume: 0.0,
            std_error: 0.0,
            hits: 0,
            samples,
        });
    }
    let box_vol = 8.0 * b1 * b23 * b23;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c34_766f_6c75_6d65);
    let mut hits = 0u64;
    for _ in 0..samples {
        let x1 = rng.gen_range(-b1..b1);
        let x2 = rng.gen_range(-b23..b23);
        let x3 = rng.gen_range(-b23..b23);
        let q = x1 * x2 - x3;
        let v1 = q * q + x1 * x1 + 1.0;
        let v2 = x3 * x3 + x2 * x2 + 1.0;
        if v1 >= lo1 && v1 <= hi1 && v2 >= lo2 && v2 <= hi2 {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let volume = box_vol * p;
    let std_error = box_vol * (p * (1.0 - p) / samples as f64).sqrt();
    if hits == 0 || std_error > 0.1 * volume {
        return Err(TransformError::InsufficientSamples {
            hits,
            samples,
            se_rel: if volume > 0.0 {
                std_error / volume
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(VolumeEstimate {
        volume,
        std_error,
        hits,
        samples,
    })
}
