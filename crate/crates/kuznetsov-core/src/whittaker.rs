//! GL(3) and GL(2) Whittaker functions.
//!
//! The normalized GL(3) Whittaker function W̃ is computed by two independent
//! representations that share nothing beyond the Γ and K-Bessel primitives:
//!
//! * [`whittaker_mb`] evaluates the double Mellin–Barnes contour integral
//!   with a product of six Γ-factors coupled through 1/Γ((s₁+s₂)/2),
//! * [`whittaker_tv`] evaluates the double K-Bessel integral of
//!   Takhtadzhyan and Vinogradov.
//!
//! Agreement between the two routes is the primary correctness check for
//! everything downstream, so they must never be merged or short-circuited
//! into each other.

use crate::numerics::{
    abs_gamma, adaptive_1d, bessel_k, gauss_legendre, log_gamma, QuadOptions,
};
use crate::spectral::SpectralParams;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, RwLock};
use thiserror::Error;

/// Abscissa of both Mellin–Barnes contours. Unitary spectral parameters
/// satisfy max|Re αⱼ| ≤ 1/2, so 0.6 stays right of every Γ-pole while the
/// integrand still decays like e^{−π|t|/2} along the contour.
pub const MB_CONTOUR: f64 = 0.6;

/// Which representation produced a Whittaker value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    MellinBarnes,
    DoubleBessel,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::MellinBarnes => write!(f, "mellin_barnes"),
            Representation::DoubleBessel => write!(f, "double_bessel"),
        }
    }
}

/// A single evaluated Whittaker value with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhittakerPoint {
    pub params: SpectralParams,
    pub y1: f64,
    pub y2: f64,
    pub value: Complex64,
    /// Estimated relative error of `value` (absolute when the value itself
    /// vanishes). Heuristic, not a rigorous enclosure.
    pub err: f64,
    pub representation: Representation,
}

#[derive(Debug, Error)]
pub enum WhittakerError {
    #[error("Gamma factor at 1/2 + (3/2)nu hits a pole for nu = {0}")]
    GammaPole(Complex64),
    #[error("contour abscissa {abscissa} too close to max|Re alpha| = {max_re}")]
    ContourTooLeft { abscissa: f64, max_re: f64 },
    #[error("quadrature error {err:.3e} above requested tolerance {tol:.3e}")]
    NotConverged { err: f64, tol: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// ∏ⱼ |Γ(1/2 + (3/2) i Im νⱼ)| over ν₀, ν₁, ν₂.
///
/// This real product normalizes both representations; for unitary spectral
/// parameters it equals |∏ Γ(1/2 + (3/2)νⱼ)| by the {α} = {−ᾱ} symmetry.
pub(crate) fn imag_gamma_norm(p: &SpectralParams) -> f64 {
    [p.nu0(), p.nu1, p.nu2]
        .iter()
        .map(|nu| abs_gamma(Complex64::new(0.5, 1.5 * nu.im)))
        .product()
}

/// W̃_{ν̄₁,ν̄₂} = conj(W̃_{ν₁,ν₂}) is enforced structurally, the same way the
/// K-Bessel primitive handles conjugate orders: parameters in the lower
/// half of the (Im ν₁, Im ν₂) lexicographic order are evaluated at their
/// conjugate and conjugated back. Returns the parameter to evaluate instead,
/// or None when `p` is already canonical.
pub(crate) fn conjugate_canonical(p: &SpectralParams) -> Option<SpectralParams> {
    if p.nu1.im < 0.0 || (p.nu1.im == 0.0 && p.nu2.im < 0.0) {
        Some(SpectralParams::new(p.nu1.conj(), p.nu2.conj()))
    } else {
        None
    }
}

pub(crate) fn is_gamma_pole(z: Complex64) -> bool {
    z.im.abs() < 1e-12 && z.re < 0.5 && (z.re - z.re.round()).abs() < 1e-12
}

/// The constant c_{ν₁,ν₂} relating the classical completion to the
/// re-normalized W̃: π^{−3ν₀} ∏ⱼ Γ(1/2 + (3/2)νⱼ) / |Γ(1/2 + (3/2) i Im νⱼ)|.
///
/// Unimodular for tempered parameters, and exactly 1 at ν₁ = ν₂ = 0.
pub fn normalization_const(p: &SpectralParams) -> Result<Complex64, WhittakerError> {
    let mut log_acc = Complex64::new(0.0, 0.0);
    for nu in [p.nu0(), p.nu1, p.nu2] {
        let z = Complex64::new(0.5 + 1.5 * nu.re, 1.5 * nu.im);
        if is_gamma_pole(z) {
            return Err(WhittakerError::GammaPole(nu));
        }
        log_acc += log_gamma(z);
        log_acc -= abs_gamma(Complex64::new(0.5, 1.5 * nu.im)).ln();
    }
    log_acc -= 3.0 * p.nu0() * PI.ln();
    Ok(log_acc.exp())
}

/// GL(2) analogue: W_ν(y) = 2π^{1/2} |Γ(1/2+ν)|^{−1} √y K_ν(2πy).
pub fn gl2_whittaker(nu: Complex64, y: f64) -> Complex64 {
    assert!(y > 0.0, "gl2_whittaker requires y > 0, got {y}");
    let norm = abs_gamma(Complex64::new(0.5 + nu.re, nu.im));
    2.0 * PI.sqrt() / norm * y.sqrt() * bessel_k(nu, 2.0 * PI * y)
}

// ---------------------------------------------------------------------------
// Double K-Bessel (Takhtadzhyan–Vinogradov) route
// ---------------------------------------------------------------------------

/// WKB decay exponent of K_{ip}(x) past its turning point: −ln of the
/// magnitude relative to the turning-point value, zero in the oscillatory
/// regime x ≤ p.
pub(crate) fn wkb_decay(x: f64, p: f64) -> f64 {
    if x <= p {
        0.0
    } else {
        (x * x - p * p).sqrt() - p * (p / x).acos()
    }
}

/// Truncation window for the v-integral: march outward from v = 0 until the
/// combined decay exponent of both K factors has risen 45 above its running
/// minimum, which bounds the discarded tails by ~e^{−45} of the peak.
fn tv_window(p: f64, y1: f64, y2: f64) -> (f64, f64) {
    let decay = |v: f64| {
        let x_left = 2.0 * PI * y2 * (1.0 + (-v).exp()).sqrt();
        let x_right = 2.0 * PI * y1 * (1.0 + v.exp()).sqrt();
        wkb_decay(x_left, p) + wkb_decay(x_right, p)
    };
    let march = |dir: f64| {
        let mut best = decay(0.0);
        let mut v = 0.0;
        loop {
            v += 0.25 * dir;
            let d = decay(v);
            best = best.min(d);
            if (d - best >= 45.0 && v.abs() >= 0.5) || v.abs() >= 80.0 {
                return v;
            }
        }
    };
    (march(-1.0), march(1.0))
}

/// W̃ by the double K-Bessel integral, after the substitution u = e^v:
///
///   W̃ = 4π^{3/2} ∏|Γ(1/2+(3/2)i Im νⱼ)|^{−1} y₁y₂ (y₁/y₂)^{(ν₁−ν₂)/2}
///        ∫ℝ K_{(3/2)ν₀}(2πy₂√(1+e^{−v})) K_{(3/2)ν₀}(2πy₁√(1+e^{v}))
///           e^{(3/4)(ν₁−ν₂)v} dv.
///
/// The leading constant is 4, not the 8 sometimes seen with this integrand:
/// the u → u² change of variable that produces the √(1+1/u), √(1+u)
/// arguments halves the prefactor of the defining integral, and only this
/// normalization agrees with the Mellin–Barnes representation (checked to
/// 1e-11 externally and continuously by the dual-route tests here).
pub fn whittaker_tv(
    p: &SpectralParams,
    y1: f64,
    y2: f64,
    tol: f64,
) -> Result<WhittakerPoint, WhittakerError> {
    if !(y1 > 0.0 && y2 > 0.0) {
        return Err(WhittakerError::Invalid(format!(
            "arguments must be positive, got ({y1}, {y2})"
        )));
    }
    if let Some(pbar) = conjugate_canonical(p) {
        let mut w = whittaker_tv(&pbar, y1, y2, tol)?;
        w.params = *p;
        w.value = w.value.conj();
        return Ok(w);
    }
    let order = 1.5 * p.nu0();
    let dnu = p.nu1 - p.nu2;
    let (v_lo, v_hi) = tv_window(order.im.abs(), y1, y2);

    let f = |v: f64| {
        let k_left = bessel_k(order, 2.0 * PI * y2 * (1.0 + (-v).exp()).sqrt());
        let k_right = bessel_k(order, 2.0 * PI * y1 * (1.0 + v.exp()).sqrt());
        k_left * k_right * (0.75 * dnu * v).exp()
    };
    let opts = QuadOptions {
        epsabs: 1e-280,
        epsrel: tol / 3.0,
        limit: 500,
        budget: 4_000_000,
        support: None,
    };
    let res = adaptive_1d(f, v_lo, v_hi, &opts);
    let mag = res.value.norm();
    let rel_err = if mag > 0.0 {
        res.err_estimate / mag
    } else {
        res.err_estimate
    };
    if !res.converged || !rel_err.is_finite() {
        return Err(WhittakerError::NotConverged { err: rel_err, tol });
    }

    let pref = 4.0 * PI.powf(1.5) / imag_gamma_norm(p)
        * y1
        * y2
        * (0.5 * dnu * (y1 / y2).ln()).exp();
    Ok(WhittakerPoint {
        params: *p,
        y1,
        y2,
        value: pref * res.value,
        err: rel_err,
        representation: Representation::DoubleBessel,
    })
}

// ---------------------------------------------------------------------------
// Mellin–Barnes route
// ---------------------------------------------------------------------------

/// Precomputed double-contour quadrature for one spectral parameter.
///
/// The integrand factors as exp(A(s₁) + B(s₂) − log Γ((s₁+s₂)/2)) with A, B
/// independent of (y₁, y₂), so the whole coupled matrix
/// M_{ij} = w_i w_j exp(A_i + B_j − log Γ((s₁+s₂)/2)) can be tabulated once;
/// each evaluation then costs one phase-weighted bilinear sum. Nodes are
/// composite Gauss–Legendre panels sized to the distance between the contour
/// and the nearest Γ-pole, which keeps the convergence geometric.
pub struct MbPlan {
    pub params: SpectralParams,
    contour: f64,
    pref: f64,
    fine: MbGrid,
    coarse: MbGrid,
}

struct MbGrid {
    t: Vec<f64>,
    /// Row-major t.len() × t.len() coupled integrand matrix.
    m: Vec<Complex64>,
}

impl MbGrid {
    fn build(alpha: &[Complex64; 3], c: f64, t_max: f64, panel_w: f64, nodes: usize) -> MbGrid {
        let panels = ((2.0 * t_max) / panel_w).ceil() as usize;
        let h = 2.0 * t_max / panels as f64;
        let (gx, gw) = gauss_legendre(nodes);
        let mut t = Vec::with_capacity(panels * nodes);
        let mut logw = Vec::with_capacity(panels * nodes);
        for k in 0..panels {
            let mid = -t_max + (k as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                t.push(mid + 0.5 * h * x);
                logw.push((0.5 * h * w).ln());
            }
        }
        let n = t.len();
        let ln_pi = PI.ln();
        let row_log: Vec<Complex64> = t
            .iter()
            .zip(&logw)
            .map(|(&ti, &lw)| {
                let s1 = Complex64::new(c, ti);
                let mut acc = Complex64::new(lw, 0.0) - s1 * ln_pi;
                for a in alpha {
                    acc += log_gamma((s1 + a) / 2.0);
                }
                acc
            })
            .collect();
        let col_log: Vec<Complex64> = t
            .iter()
            .zip(&logw)
            .map(|(&tj, &lw)| {
                let s2 = Complex64::new(c, tj);
                let mut acc = Complex64::new(lw, 0.0) - s2 * ln_pi;
                for a in alpha {
                    acc += log_gamma((s2 - a) / 2.0);
                }
                acc
            })
            .collect();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let ti = t[i];
            for (j, slot) in row.iter_mut().enumerate() {
                let s_half = Complex64::new(c, 0.5 * (ti + t[j]));
                let e = row_log[i] + col_log[j] - log_gamma(s_half);
                *slot = if e.re < -700.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    e.exp()
                };
            }
        });
        MbGrid { t, m }
    }

    fn eval(&self, y1: f64, y2: f64) -> Complex64 {
        let n = self.t.len();
        let ly1 = y1.ln();
        let ly2 = y2.ln();
        let ph1: Vec<Complex64> = self
            .t
            .iter()
            .map(|&t| Complex64::from_polar(1.0, -t * ly1))
            .collect();
        let ph2: Vec<Complex64> = self
            .t
            .iter()
            .map(|&t| Complex64::from_polar(1.0, -t * ly2))
            .collect();
        // Per-row sums are combined sequentially so the result does not
        // depend on rayon's join order; reruns must be bit-identical.
        let row_sums: Vec<Complex64> = if n >= 768 {
            self.m
                .par_chunks(n)
                .zip(ph1.par_iter())
                .map(|(row, &p1)| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (mij, &p2) in row.iter().zip(&ph2) {
                        s += mij * p2;
                    }
                    p1 * s
                })
                .collect()
        } else {
            self.m
                .chunks(n)
                .zip(&ph1)
                .map(|(row, &p1)| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (mij, &p2) in row.iter().zip(&ph2) {
                        s += mij * p2;
                    }
                    p1 * s
                })
                .collect()
        };
        row_sums.iter().sum()
    }

    /// Raw bilinear sums over the whole tensor grid ys × ys in one pass:
    /// out[a·g + b] equals eval(ys[a], ys[b]) without the y-power scaling.
    /// Factoring the contraction as Pᵀ(M P) costs n²g instead of the n²g²
    /// of pointwise calls.
    fn eval_tensor(&self, ys: &[f64]) -> Vec<Complex64> {
        let n = self.t.len();
        let g = ys.len();
        let lny: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        // phases[j*g + b] = ys[b]^{-i t_j}
        let phases: Vec<Complex64> = self
            .t
            .iter()
            .flat_map(|&t| lny.iter().map(move |&l| Complex64::from_polar(1.0, -t * l)))
            .collect();
        let mut k = vec![Complex64::new(0.0, 0.0); n * g];
        k.par_chunks_mut(g).enumerate().for_each(|(i, row)| {
            let mrow = &self.m[i * n..(i + 1) * n];
            for (j, &mij) in mrow.iter().enumerate() {
                if mij.re == 0.0 && mij.im == 0.0 {
                    continue;
                }
                let ph = &phases[j * g..(j + 1) * g];
                for (slot, &p) in row.iter_mut().zip(ph) {
                    *slot += mij * p;
                }
            }
        });
        let mut out = vec![Complex64::new(0.0, 0.0); g * g];
        out.par_chunks_mut(g).enumerate().for_each(|(a, row)| {
            for i in 0..n {
                let pa = phases[i * g + a];
                let krow = &k[i * g..(i + 1) * g];
                for (slot, &kv) in row.iter_mut().zip(krow) {
                    *slot += pa * kv;
                }
            }
        });
        out
    }
}

/// Contour abscissa for one evaluation. The value of the double integral is
/// independent of rightward shifts (every numerator Γ-pole sits at
/// Re s ≤ max|Re αⱼ| ≤ 1/2 and the coupling Γ is in the denominator), but
/// the integrand mass is not: for y₁y₂ > 1 the fixed abscissa keeps O(1)
/// mass against an exponentially small value, and the bilinear sum drowns in
/// rounding noise. Climbing towards the mass-minimizing abscissa
/// ≈ √(8 y₁y₂) restores relative accuracy; a coarse ladder keeps the plan
/// cache effective.
pub fn contour_abscissa(y1: f64, y2: f64) -> f64 {
    let prod = y1 * y2;
    if prod <= 1.0 {
        return MB_CONTOUR;
    }
    let target = (8.0 * prod).sqrt();
    let mut c = MB_CONTOUR;
    while c < target && c + 2.0 <= 12.61 {
        c += 2.0;
    }
    c
}

impl MbPlan {
    pub fn new(p: &SpectralParams, contour: f64) -> Result<MbPlan, WhittakerError> {
        let alpha = p.alpha();
        let max_re = alpha.iter().map(|a| a.re.abs()).fold(0.0, f64::max);
        let c = contour;
        if c - max_re < 0.05 {
            return Err(WhittakerError::ContourTooLeft {
                abscissa: c,
                max_re,
            });
        }
        let max_im = alpha.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
        // The Γ-product's e^{−π t/2} decay sets in once |t| clears the
        // abscissa; +30 past that buys ~e^{−47}.
        let t_max = max_im + c + 30.0;
        let pole_dist = c - max_re;
        let panel_w = (3.0 * pole_dist).clamp(0.5, 1.8);
        let projected = ((2.0 * t_max / panel_w).ceil() as usize) * 28;
        if projected > 3200 {
            return Err(WhittakerError::Invalid(format!(
                "contour grid would need {projected} nodes per axis; \
                 use the double Bessel route for this parameter"
            )));
        }
        let fine = MbGrid::build(&alpha, c, t_max, panel_w, 28);
        let coarse = MbGrid::build(&alpha, c, t_max, panel_w, 20);
        let pref = PI.powf(1.5) / (16.0 * PI * PI * imag_gamma_norm(p));
        Ok(MbPlan {
            params: *p,
            contour: c,
            pref,
            fine,
            coarse,
        })
    }

    /// Evaluate W̃(y₁, y₂); the second component is the estimated relative
    /// error, taken as the difference between the two node densities.
    pub fn eval(&self, y1: f64, y2: f64) -> (Complex64, f64) {
        let vf = self.fine.eval(y1, y2);
        let vc = self.coarse.eval(y1, y2);
        let scale =
            self.pref * y1.powf(1.0 - self.contour) * y2.powf(1.0 - self.contour);
        let err = if vf.norm() > 0.0 {
            (vf - vc).norm() / vf.norm()
        } else {
            (vf - vc).norm()
        };
        (scale * vf, err)
    }

    /// Tabulate W̃ on the full tensor grid ys × ys, returning the fine and
    /// coarse node-density values (row-major, row index = y₁). Intended for
    /// integrals over W̃ where a whole grid is consumed at once.
    pub fn eval_tensor(&self, ys: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let g = ys.len();
        let pw: Vec<f64> = ys.iter().map(|y| y.powf(1.0 - self.contour)).collect();
        let scale_all = |mut v: Vec<Complex64>| {
            for a in 0..g {
                let row_scale = self.pref * pw[a];
                for b in 0..g {
                    v[a * g + b] *= row_scale * pw[b];
                }
            }
            v
        };
        let vf = scale_all(self.fine.eval_tensor(ys));
        let vc = scale_all(self.coarse.eval_tensor(ys));
        (vf, vc)
    }
}

fn quantize(x: f64) -> i64 {
    (x / 1e-12).round() as i64
}

type PlanKey = (i64, i64, i64, i64);

fn plan_key(p: &SpectralParams) -> PlanKey {
    (
        quantize(p.nu1.re),
        quantize(p.nu1.im),
        quantize(p.nu2.re),
        quantize(p.nu2.im),
    )
}

static PLAN_CACHE: Lazy<RwLock<VecDeque<((PlanKey, i64), Arc<MbPlan>)>>> =
    Lazy::new(|| RwLock::new(VecDeque::new()));

const PLAN_CACHE_CAP: usize = 8;

/// Fetch a shared Mellin–Barnes plan for `p` on the contour Re s = `c`,
/// building it on first use. A small FIFO keeps the most recent
/// (parameter, contour) plans resident, since grid sweeps evaluate many
/// (y₁, y₂) pairs per parameter.
pub fn mb_plan(p: &SpectralParams, c: f64) -> Result<Arc<MbPlan>, WhittakerError> {
    let key = (plan_key(p), quantize(c));
    {
        let cache = PLAN_CACHE.read().unwrap();
        if let Some((_, plan)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(Arc::clone(plan));
        }
    }
    let plan = Arc::new(MbPlan::new(p, c)?);
    let mut cache = PLAN_CACHE.write().unwrap();
    if !cache.iter().any(|(k, _)| *k == key) {
        cache.push_back((key, Arc::clone(&plan)));
        while cache.len() > PLAN_CACHE_CAP {
            cache.pop_front();
        }
    }
    Ok(plan)
}

/// W̃ by the double Mellin–Barnes integral
///
///   W̃ = y₁y₂ π^{3/2} ∏|Γ(1/2+(3/2)i Im νⱼ)|^{−1} (2πi)^{−2} ∫∫
///        ∏ⱼΓ((s₁+αⱼ)/2) ∏ⱼΓ((s₂−αⱼ)/2) / (4π^{s₁+s₂} Γ((s₁+s₂)/2))
///        y₁^{−s₁} y₂^{−s₂} ds₁ ds₂
///
/// over vertical contours Re s₁ = Re s₂ = c, with c chosen per argument by
/// [`contour_abscissa`] (the base abscissa [`MB_CONTOUR`] for y₁y₂ ≤ 1).
pub fn whittaker_mb(
    p: &SpectralParams,
    y1: f64,
    y2: f64,
    tol: f64,
) -> Result<WhittakerPoint, WhittakerError> {
    if !(y1 > 0.0 && y2 > 0.0) {
        return Err(WhittakerError::Invalid(format!(
            "arguments must be positive, got ({y1}, {y2})"
        )));
    }
    if let Some(pbar) = conjugate_canonical(p) {
        let mut w = whittaker_mb(&pbar, y1, y2, tol)?;
        w.params = *p;
        w.value = w.value.conj();
        return Ok(w);
    }
    let plan = mb_plan(p, contour_abscissa(y1, y2))?;
    let (value, err) = plan.eval(y1, y2);
    if !err.is_finite() || err > tol {
        return Err(WhittakerError::NotConverged { err, tol });
    }
    Ok(WhittakerPoint {
        params: *p,
        y1,
        y2,
        value,
        err,
        representation: Representation::MellinBarnes,
    })
}

// ---------------------------------------------------------------------------
// Uniform bound
// ---------------------------------------------------------------------------

/// Calibrated so the bound dominates |W̃| on the audit grid |Im νⱼ| ≤ 10,
/// y ∈ [0.1, 10]² at c₁ = c₂ = 0.6 (see the calibration test).
pub const PROP1_CALIBRATION: f64 = 8.0;

/// Power-envelope bound
/// C y₁y₂ N^{−1/2+ε} (y₁/N)^{−c₁} (y₂/N)^{−c₂} with N = 1 + |ν₁| + |ν₂|,
/// valid for contour exponents strictly right of max|Re αⱼ|.
pub fn prop1_bound(
    p: &SpectralParams,
    y1: f64,
    y2: f64,
    c1: f64,
    c2: f64,
    eps: f64,
) -> Result<f64, WhittakerError> {
    let theta = p.theta();
    if c1 <= theta || c2 <= theta {
        return Err(WhittakerError::ContourTooLeft {
            abscissa: c1.min(c2),
            max_re: theta,
        });
    }
    let n = 1.0 + p.nu1.norm() + p.nu2.norm();
    Ok(PROP1_CALIBRATION
        * y1
        * y2
        * n.powf(-0.5 + eps)
        * (y1 / n).powf(-c1)
        * (y2 / n).powf(-c2))
}

/// Computed power-envelope constant: returns M such that
/// |W̃(y₁, y₂)| ≤ M · y₁^{1−c₁} y₂^{1−c₂} for all y₁, y₂ > 0.
///
/// M is the L¹ mass of the double-contour integrand on the (possibly
/// rectangular) contour (Re s₁, Re s₂) = (c₁, c₂); pulling the absolute value
/// inside the integrals gives the bound with no calibration constant. Any
/// c₁, c₂ > max|Re αⱼ| is admissible since rightward shifts cross no poles.
pub fn mb_l1_majorant(
    p: &SpectralParams,
    c1: f64,
    c2: f64,
) -> Result<f64, WhittakerError> {
    let pc = conjugate_canonical(p);
    let p = pc.as_ref().unwrap_or(p);
    let memo_key = (plan_key(p), quantize(c1), quantize(c2));
    if let Some(&m) = MAJORANT_CACHE.read().unwrap().get(&memo_key) {
        return Ok(m);
    }
    let alpha = p.alpha();
    let max_re = alpha.iter().map(|a| a.re.abs()).fold(0.0, f64::max);
    let cmin = c1.min(c2);
    if cmin - max_re < 1e-3 {
        return Err(WhittakerError::ContourTooLeft {
            abscissa: cmin,
            max_re,
        });
    }
    let max_im = alpha.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
    let t_max = max_im + c1 + c2 + 45.0;
    let panels = (2.0 * t_max).ceil() as usize;
    let h = 2.0 * t_max / panels as f64;
    let (gx, gw) = gauss_legendre(8);
    let mut t = Vec::with_capacity(panels * 8);
    let mut w = Vec::with_capacity(panels * 8);
    for k in 0..panels {
        let mid = -t_max + (k as f64 + 0.5) * h;
        for (x, wt) in gx.iter().zip(&gw) {
            t.push(mid + 0.5 * h * x);
            w.push(0.5 * h * wt);
        }
    }
    let abs_gamma_triple = |c: f64, ti: f64, sign: f64| -> f64 {
        alpha
            .iter()
            .map(|a| {
                log_gamma((Complex64::new(c, ti) + sign * a) / 2.0).re
            })
            .sum()
    };
    let rows: Vec<f64> = t.iter().map(|&ti| abs_gamma_triple(c1, ti, 1.0)).collect();
    let cols: Vec<f64> = t.iter().map(|&tj| abs_gamma_triple(c2, tj, -1.0)).collect();
    let n = t.len();
    let row_acc: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                let coupling =
                    log_gamma(Complex64::new(c1 + c2, t[i] + t[j]) / 2.0).re;
                let e = rows[i] + cols[j] - coupling;
                if e > -700.0 {
                    acc += w[i] * w[j] * e.exp();
                }
            }
            acc
        })
        .collect();
    let mass: f64 = row_acc.iter().sum();
    let pref = PI.powf(1.5)
        / (4.0 * PI.powf(c1 + c2) * 4.0 * PI * PI * imag_gamma_norm(p));
    let m = pref * mass;
    MAJORANT_CACHE.write().unwrap().insert(memo_key, m);
    Ok(m)
}

static MAJORANT_CACHE: Lazy<RwLock<HashMap<(PlanKey, i64, i64), f64>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

// ---------------------------------------------------------------------------
// Evaluator registry and memoization
// ---------------------------------------------------------------------------

/// Strategy interface so callers can select a representation by name
/// (CLI flag, config file) without matching on an enum everywhere.
pub trait WhittakerEvaluator: Send + Sync {
    fn name(&self) -> &'static str;
    fn representation(&self) -> Representation;
    fn evaluate(
        &self,
        p: &SpectralParams,
        y1: f64,
        y2: f64,
        tol: f64,
    ) -> Result<WhittakerPoint, WhittakerError>;
}

pub struct MellinBarnesEvaluator;

impl WhittakerEvaluator for MellinBarnesEvaluator {
    fn name(&self) -> &'static str {
        "mellin_barnes"
    }
    fn representation(&self) -> Representation {
        Representation::MellinBarnes
    }
    fn evaluate(
        &self,
        p: &SpectralParams,
        y1: f64,
        y2: f64,
        tol: f64,
    ) -> Result<WhittakerPoint, WhittakerError> {
        whittaker_mb(p, y1, y2, tol)
    }
}

pub struct DoubleBesselEvaluator;

impl WhittakerEvaluator for DoubleBesselEvaluator {
    fn name(&self) -> &'static str {
        "double_bessel"
    }
    fn representation(&self) -> Representation {
        Representation::DoubleBessel
    }
    fn evaluate(
        &self,
        p: &SpectralParams,
        y1: f64,
        y2: f64,
        tol: f64,
    ) -> Result<WhittakerPoint, WhittakerError> {
        whittaker_tv(p, y1, y2, tol)
    }
}

pub fn evaluator_by_name(name: &str) -> Option<Box<dyn WhittakerEvaluator>> {
    match name {
        "mb" | "mellin_barnes" | "mellin-barnes" => Some(Box::new(MellinBarnesEvaluator)),
        "tv" | "bessel" | "double_bessel" | "double-bessel" => {
            Some(Box::new(DoubleBesselEvaluator))
        }
        _ => None,
    }
}

/// Representation to use when the caller has no preference. Near-coincident
/// Langlands parameters (any of ν₁, ν₂, ν₀ within 1e-3 of zero) route to
/// Mellin–Barnes, whose contour integrand is smooth through the coincidence.
pub fn preferred_representation(p: &SpectralParams) -> Representation {
    let min_nu = p.nu1.norm().min(p.nu2.norm()).min(p.nu0().norm());
    if min_nu < 1e-3 {
        Representation::MellinBarnes
    } else {
        Representation::DoubleBessel
    }
}

type ValueKey = (PlanKey, i64, i64, u8, i64);

static VALUE_CACHE: Lazy<RwLock<HashMap<ValueKey, (Complex64, f64)>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

/// Memoized evaluation. Keys canonicalize every float to 1e-12 resolution so
/// that values computed from config files and from sweeps coincide.
pub fn whittaker_cached(
    p: &SpectralParams,
    y1: f64,
    y2: f64,
    rep: Representation,
    tol: f64,
) -> Result<WhittakerPoint, WhittakerError> {
    let key: ValueKey = (
        plan_key(p),
        quantize(y1),
        quantize(y2),
        match rep {
            Representation::MellinBarnes => 0,
            Representation::DoubleBessel => 1,
        },
        quantize(tol),
    );
    if let Some(&(value, err)) = VALUE_CACHE.read().unwrap().get(&key) {
        return Ok(WhittakerPoint {
            params: *p,
            y1,
            y2,
            value,
            err,
            representation: rep,
        });
    }
    let point = match rep {
        Representation::MellinBarnes => whittaker_mb(p, y1, y2, tol)?,
        Representation::DoubleBessel => whittaker_tv(p, y1, y2, tol)?,
    };
    VALUE_CACHE
        .write()
        .unwrap()
        .insert(key, (point.value, point.err));
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // mpmath, 30 digits: besselk(0, 2*pi).
    const K0_2PI: f64 = 9.1658436090437031189e-4;

    #[test]
    fn normalization_const_unimodular_when_tempered() {
        let p = SpectralParams::tempered(1.3, 0.7);
        let c = normalization_const(&p).unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-12, "|c| = {}", c.norm());
    }

    #[test]
    fn normalization_const_is_one_at_origin() {
        let p = SpectralParams::new(c64(0.0, 0.0), c64(0.0, 0.0));
        let c = normalization_const(&p).unwrap();
        assert!((c - c64(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn normalization_const_finite_at_exceptional_point() {
        let p = SpectralParams::exceptional(0.3, 5.0);
        let c = normalization_const(&p).unwrap();
        assert!(c.norm().is_finite() && c.norm() > 0.0);
        assert!(c.norm() > 1e-3 && c.norm() < 1e3, "|c| = {}", c.norm());
    }

    #[test]
    fn normalization_const_rejects_gamma_pole() {
        // 1/2 + (3/2)nu1 = 0 at nu1 = -1/3.
        let p = SpectralParams::new(c64(-1.0 / 3.0, 0.0), c64(0.9, 0.0));
        assert!(matches!(
            normalization_const(&p),
            Err(WhittakerError::GammaPole(_))
        ));
    }

    #[test]
    fn gl2_closed_form_at_origin() {
        // Gamma(1/2) = sqrt(pi) cancels, leaving 2 K_0(2 pi).
        let w = gl2_whittaker(c64(0.0, 0.0), 1.0);
        assert!((w.re - 2.0 * K0_2PI).abs() < 1e-15 + 2.0 * K0_2PI * 1e-10);
        assert!(w.im.abs() < 1e-15);
    }

    #[test]
    fn gl2_order_reflection() {
        let a = gl2_whittaker(c64(0.0, 3.0), 0.5);
        let b = gl2_whittaker(c64(0.0, -3.0), 0.5);
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn gl2_exponential_decay() {
        let a = gl2_whittaker(c64(0.0, 1.0), 1.0).norm();
        let b = gl2_whittaker(c64(0.0, 1.0), 10.0).norm();
        assert!(b < a * (-50.0f64).exp(), "decay ratio {}", b / a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gl2_real_and_reflection_for_imaginary_order(
            t in 0.05f64..12.0,
            y in 0.05f64..2.5,
        ) {
            let w = gl2_whittaker(c64(0.0, t), y);
            // Past the turning point the function has no zeros, so a
            // relative realness check is meaningful there.
            if 2.0 * PI * y > t {
                prop_assert!(w.im.abs() <= 1e-9 * w.re.abs());
            }
            let r = gl2_whittaker(c64(0.0, -t), y);
            prop_assert!((w - r).norm() <= 1e-10 * w.norm().max(1e-300));
        }
    }

    // mpmath oracles for the normalized GL(3) function (30 digits, double
    // K-Bessel definition integrated independently of this crate).
    const W_00_11: f64 = 1.7661972083891614607e-8;
    const W_II_11: f64 = 2.9602463652028846466e-5;
    const W_ASYM_RE: f64 = 6.642450084397728568e-5;
    const W_ASYM_IM: f64 = -4.8221935598354659986e-6;
    const W_EXC_RE: f64 = 3.2972394631360512194e-5;
    const W_EXC_IM: f64 = -7.9834983080688791772e-7;

    #[test]
    fn tv_positive_at_origin_and_matches_oracle() {
        let p = SpectralParams::new(c64(0.0, 0.0), c64(0.0, 0.0));
        let w = whittaker_tv(&p, 1.0, 1.0, 1e-8).unwrap();
        assert!(w.value.re > 0.0);
        assert!(w.value.im.abs() < 1e-12 * w.value.re);
        assert!(
            (w.value.re - W_00_11).abs() < 1e-7 * W_00_11,
            "got {}, oracle {}",
            w.value.re,
            W_00_11
        );
    }

    #[test]
    fn tv_matches_oracle_at_asymmetric_point() {
        let p = SpectralParams::new(c64(0.0, 2.0), c64(0.0, 0.4));
        let w = whittaker_tv(&p, 1.5, 0.6, 1e-8).unwrap();
        let oracle = c64(W_ASYM_RE, W_ASYM_IM);
        assert!(
            (w.value - oracle).norm() < 1e-7 * oracle.norm(),
            "got {}, oracle {}",
            w.value,
            oracle
        );
    }

    #[test]
    fn mb_matches_oracle_at_symmetric_point() {
        let p = SpectralParams::tempered(1.0, 1.0);
        let w = whittaker_mb(&p, 1.0, 1.0, 1e-6).unwrap();
        assert!(
            (w.value.re - W_II_11).abs() < 1e-7 * W_II_11,
            "got {}, oracle {}",
            w.value.re,
            W_II_11
        );
        assert!(w.value.im.abs() < 1e-10 * w.value.re);
    }

    #[test]
    fn mb_matches_tv_at_spec_points() {
        for (p, y1, y2) in [
            (SpectralParams::tempered(1.0, 1.0), 1.0, 1.0),
            (SpectralParams::tempered(2.0, 2.0), 2.0, 2.0),
        ] {
            let a = whittaker_mb(&p, y1, y2, 1e-6).unwrap();
            let b = whittaker_tv(&p, y1, y2, 1e-7).unwrap();
            let rel = (a.value - b.value).norm() / b.value.norm();
            assert!(rel <= 1e-5, "routes disagree by {rel:.2e} at {p:?}");
        }
    }

    // mpmath, 40 digits, via the double Bessel integral: corner points of the
    // dev grid, including the deep exponential tail where the two routes are
    // hardest to keep in agreement.
    #[test]
    fn both_routes_match_oracle_at_corner_points() {
        let corners: [(f64, f64, f64, f64, f64); 6] = [
            (2.0, 2.0, 2.0, 2.0, 3.67254284098256114e-9),
            (1.0, 1.0, 2.0, 2.0, 1.31292059331405507e-12),
            (5.0, 5.0, 2.0, 2.0, 0.104924102411024948),
            (1.0, 5.0, 2.0, 2.0, 1.84073808097191956e-6),
            (1.0, 1.0, 0.5, 0.5, 0.0588211682313551934),
            (5.0, 5.0, 0.5, 2.0, 0.548892555085932529),
        ];
        for (t1, t2, y1, y2, oracle) in corners {
            let p = SpectralParams::tempered(t1, t2);
            let a = whittaker_mb(&p, y1, y2, 1e-6).unwrap();
            let b = whittaker_tv(&p, y1, y2, 1e-7).unwrap();
            for (route, w) in [("mb", &a), ("tv", &b)] {
                let rel = (w.value - c64(oracle, 0.0)).norm() / oracle;
                assert!(
                    rel <= 1e-5,
                    "{route} off oracle by {rel:.2e} at nu=({t1},{t2}), y=({y1},{y2})"
                );
            }
        }
    }

    #[test]
    fn mb_argument_swap_symmetry() {
        let a = whittaker_mb(&SpectralParams::tempered(2.0, 3.0), 0.7, 1.3, 1e-7).unwrap();
        let b = whittaker_mb(&SpectralParams::tempered(3.0, 2.0), 1.3, 0.7, 1e-7).unwrap();
        let rel = (a.value - b.value).norm() / a.value.norm();
        assert!(rel <= 1e-8, "swap symmetry broken by {rel:.2e}");
    }

    #[test]
    fn mb_conjugation_symmetry_at_exceptional_point() {
        let p = SpectralParams::exceptional(0.3, 2.0);
        let pbar = SpectralParams::new(p.nu1.conj(), p.nu2.conj());
        let a = whittaker_mb(&p, 0.8, 1.2, 1e-7).unwrap();
        let b = whittaker_mb(&pbar, 0.8, 1.2, 1e-7).unwrap();
        let rel = (a.value - b.value.conj()).norm() / a.value.norm();
        assert!(rel <= 1e-10, "conjugation symmetry broken by {rel:.2e}");
        // Independent oracle at the same point.
        let oracle = c64(W_EXC_RE, W_EXC_IM);
        assert!((a.value - oracle).norm() < 1e-6 * oracle.norm());
    }

    #[test]
    fn tv_weyl_orbit_invariance() {
        let p = SpectralParams::tempered(1.1, 0.6);
        let base = whittaker_tv(&p, 1.2, 0.8, 1e-8).unwrap();
        for image in p.weyl_orbit() {
            let w = whittaker_tv(&image, 1.2, 0.8, 1e-8).unwrap();
            let rel = (w.value - base.value).norm() / base.value.norm();
            assert!(rel <= 1e-6, "orbit image {image:?} off by {rel:.2e}");
        }
    }

    #[test]
    fn mb_weyl_orbit_invariance_tight() {
        let p = SpectralParams::tempered(2.0, 3.0);
        let base = whittaker_mb(&p, 0.7, 1.3, 1e-7).unwrap();
        for image in p.weyl_orbit() {
            let w = whittaker_mb(&image, 0.7, 1.3, 1e-7).unwrap();
            let rel = (w.value - base.value).norm() / base.value.norm();
            assert!(rel <= 1e-8, "orbit image {image:?} off by {rel:.2e}");
        }
    }

    #[test]
    fn mb_rejects_contour_violation() {
        // alpha_1 = 2 nu_1 = 0.7 exceeds the contour margin.
        let p = SpectralParams::new(c64(0.35, 0.0), c64(0.0, 0.0));
        assert!(matches!(
            whittaker_mb(&p, 1.0, 1.0, 1e-6),
            Err(WhittakerError::ContourTooLeft { .. })
        ));
    }

    #[test]
    fn reported_error_within_tolerance() {
        let p = SpectralParams::tempered(1.0, 2.0);
        let w = whittaker_mb(&p, 0.9, 1.1, 1e-6).unwrap();
        assert!(w.err <= 1e-6);
        let w = whittaker_tv(&p, 0.9, 1.1, 1e-6).unwrap();
        assert!(w.err <= 1e-6);
    }

    #[test]
    fn prop1_bound_dominates_on_dev_grid() {
        for (t1, t2) in [(0.0, 0.0), (2.0, 2.0), (5.0, 5.0), (2.0, 5.0)] {
            let p = SpectralParams::tempered(t1, t2);
            for y1 in [0.1, 1.0, 10.0] {
                for y2 in [0.1, 1.0, 10.0] {
                    let w = whittaker_tv(&p, y1, y2, 1e-6).unwrap();
                    let bound = prop1_bound(&p, y1, y2, 0.6, 0.6, 0.01).unwrap();
                    assert!(
                        w.value.norm() <= bound,
                        "bound violated at nu=({t1},{t2}), y=({y1},{y2}): |W|={:.3e} > {bound:.3e}",
                        w.value.norm()
                    );
                }
            }
        }
    }

    #[test]
    fn l1_majorant_dominates_oracle_values() {
        let p = SpectralParams::tempered(1.0, 1.0);
        let m = mb_l1_majorant(&p, 0.6, 0.6).unwrap();
        // |W̃(1,1)| = 2.96e-5 and |W̃(2,2)| = 3.67e-9 must sit below
        // M·(y₁y₂)^{0.4}.
        assert!(m * 1.0 >= 2.9602e-5);
        assert!(m * 4.0_f64.powf(0.4) >= 3.673e-9);
        // Rectangular contours are admissible.
        let rect = mb_l1_majorant(&p, 0.1, 6.6).unwrap();
        assert!(rect.is_finite() && rect > 0.0);
        // The abscissas must clear the pole line Re s = max|Re α|.
        let exc = SpectralParams::exceptional(0.3, 2.0);
        assert!(mb_l1_majorant(&exc, 0.25, 0.6).is_err());
    }

    #[test]
    fn tensor_eval_matches_pointwise_eval() {
        let p = SpectralParams::tempered(1.0, 2.0);
        let plan = mb_plan(&p, MB_CONTOUR).unwrap();
        let ys = [0.3, 0.9, 1.7];
        let (vf, _) = plan.eval_tensor(&ys);
        for (a, &ya) in ys.iter().enumerate() {
            for (b, &yb) in ys.iter().enumerate() {
                let (w, _) = plan.eval(ya, yb);
                let d = (vf[a * ys.len() + b] - w).norm() / w.norm();
                assert!(d < 1e-10, "tensor/pointwise mismatch {d:.2e} at ({ya},{yb})");
            }
        }
    }

    #[test]
    fn prop1_bound_monotone_in_contour_for_small_y() {
        let p = SpectralParams::tempered(1.0, 1.0);
        let lo = prop1_bound(&p, 0.5, 0.5, 0.6, 0.6, 0.01).unwrap();
        let hi = prop1_bound(&p, 0.5, 0.5, 0.9, 0.9, 0.01).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn prop1_bound_rejects_contour_below_theta() {
        let p = SpectralParams::exceptional(0.45, 1.0);
        assert!(prop1_bound(&p, 1.0, 1.0, 0.3, 0.6, 0.01).is_err());
    }

    #[test]
    fn evaluator_registry_round_trip() {
        for (name, rep) in [
            ("mb", Representation::MellinBarnes),
            ("mellin_barnes", Representation::MellinBarnes),
            ("tv", Representation::DoubleBessel),
            ("double_bessel", Representation::DoubleBessel),
        ] {
            let ev = evaluator_by_name(name).unwrap();
            assert_eq!(ev.representation(), rep);
        }
        assert!(evaluator_by_name("series").is_none());
    }

    #[test]
    fn registry_evaluators_agree_with_direct_calls() {
        let p = SpectralParams::tempered(1.0, 1.0);
        let mb = evaluator_by_name("mb").unwrap();
        let direct = whittaker_mb(&p, 1.0, 1.0, 1e-6).unwrap();
        let via = mb.evaluate(&p, 1.0, 1.0, 1e-6).unwrap();
        assert_eq!(direct.value, via.value);
    }

    #[test]
    fn cached_values_are_bitwise_stable() {
        let p = SpectralParams::tempered(1.0, 2.0);
        let a = whittaker_cached(&p, 1.1, 0.9, Representation::MellinBarnes, 1e-6).unwrap();
        let b = whittaker_cached(&p, 1.1, 0.9, Representation::MellinBarnes, 1e-6).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.err, b.err);
        // A sub-resolution perturbation hits the same cache entry.
        let p2 = SpectralParams::new(
            p.nu1 + c64(0.0, 1e-14),
            p.nu2,
        );
        let c = whittaker_cached(&p2, 1.1, 0.9, Representation::MellinBarnes, 1e-6).unwrap();
        assert_eq!(a.value, c.value);
    }

    #[test]
    fn preferred_representation_handles_degenerate_parameters() {
        let p = SpectralParams::new(c64(0.0, 1e-5), c64(0.0, 2.0));
        assert_eq!(preferred_representation(&p), Representation::MellinBarnes);
        // nu0 ~ 0 is just as degenerate as nu1 ~ 0.
        let p = SpectralParams::new(c64(0.0, 2.0), c64(0.0, -2.0 + 1e-5));
        assert_eq!(preferred_representation(&p), Representation::MellinBarnes);
        let p = SpectralParams::tempered(1.0, 2.0);
        assert_eq!(preferred_representation(&p), Representation::DoubleBessel);
    }
}
