//! Riemann zeta on the line Re s = 1.
//!
//! Euler–Maclaurin with N ≈ max(24, |t|) initial terms and Bernoulli
//! corrections gives ζ(1+it) to ~1e-12 relative for the |t| ≤ 300 range the
//! spectral integrals visit. The reciprocal-square weight 1/|ζ(1+it)|²,
//! which multiplies the Eisenstein spectral measure, is provided separately
//! because it extends smoothly through t = 0 (the pole of ζ cancels): there
//! the Laurent expansion with Stieltjes constants takes over.

use super::NumericsError;
use num_complex::Complex64;

/// B_{2k}/(2k)! for k = 1..=7.
const EM_COEF: [f64; 7] = [
    8.333_333_333_333_333e-2,
    -1.388_888_888_888_889e-3,
    3.306_878_306_878_307e-5,
    -8.267_195_767_195_768e-7,
    2.087_675_698_786_81e-8,
    -5.284_190_138_687_493e-10,
    1.338_253_653_068_468e-11,
];

/// Stieltjes constants γ₀..γ₃.
const STIELTJES: [f64; 4] = [
    0.577_215_664_901_532_9,
    -0.072_815_845_483_676_72,
    -0.009_690_363_192_872_318,
    0.002_053_834_420_303_346,
];

/// ζ(1+it) for |t| > 1e-6, relative accuracy ~1e-10 or better.
pub fn zeta_one_line(t: f64) -> Result<Complex64, NumericsError> {
    if t.abs() <= 1e-6 {
        return Err(NumericsError::Pole(format!(
            "zeta(1+it) requested at t={t}, too close to the pole at s=1"
        )));
    }
    Ok(zeta_em(Complex64::new(1.0, t)))
}

/// Euler–Maclaurin evaluation of ζ(s) for Re s ≥ 1/2, s ≠ 1.
fn zeta_em(s: Complex64) -> Complex64 {
    let n = (s.im.abs().ceil() as usize).max(24) + 8;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 1..n {
        sum += (-s * (k as f64).ln()).exp();
    }
    let nf = n as f64;
    let n_pow = (-s * nf.ln()).exp(); // N^{-s}
    sum += n_pow * nf / (s - 1.0); // N^{1-s}/(s-1)
    sum += 0.5 * n_pow;
    // Correction terms B_{2k}/(2k)! · s(s+1)…(s+2k−2) · N^{−s−2k+1}
    let mut rising = s; // ∏_{j=0}^{2k-2}(s+j), starts as s for k=1
    let mut n_shift = n_pow / nf; // N^{-s-1}
    for (k, coef) in EM_COEF.iter().enumerate() {
        sum += *coef * rising * n_shift;
        n_shift /= nf * nf;
        let j = (2 * k + 1) as f64;
        rising = rising * (s + j) * (s + j + 1.0);
    }
    sum
}

/// 1/|ζ(1+it)|², extended smoothly through t = 0 where it vanishes
/// quadratically. Safe for use as an integrand weight on the whole line.
pub fn inv_zeta_one_line_sq(t: f64) -> f64 {
    if t.abs() >= 1e-3 {
        let z = zeta_em(Complex64::new(1.0, t));
        return 1.0 / z.norm_sqr();
    }
    // it·ζ(1+it) = 1 + γ₀(it) − γ₁(it)² + (γ₂/2)(it)³ − …
    let it = Complex64::new(0.0, t);
    let g = Complex64::new(1.0, 0.0) + STIELTJES[0] * it - STIELTJES[1] * it * it
        + (STIELTJES[2] / 2.0) * it * it * it;
    t * t / g.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values for ζ(1+it), computed with 40-digit arithmetic.
    const REFERENCE: [(f64, (f64, f64)); 9] = [
        (1e-5, (0.57721566490201737877, -99999.999999271841545)),
        (0.001, (0.57721566974671455393, -999.99992718415417402)),
        (0.5, (0.57843302109931116894, -1.9635494964529787846)),
        (1.0, (0.5821580597520036482, -0.92684856433080707654)),
        (3.0, (0.62885173395182553419, -0.10747576015058644043)),
        (14.134725, (0.32382790725591495562, 0.039378465056705203252)),
        (37.5, (0.61414421663419324577, -0.22239524876291166264)),
        (100.0, (1.6328335066867118666, -0.068131203841812490101)),
        (250.0, (0.62049961213999418001, 0.30281956929850750641)),
    ];

    #[test]
    fn matches_reference_values() {
        for (t, (wr, wi)) in REFERENCE {
            let got = zeta_one_line(t).unwrap();
            let want = Complex64::new(wr, wi);
            assert!(
                (got - want).norm() <= 1e-10 * want.norm(),
                "t={t}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn pole_rejected() {
        assert!(zeta_one_line(0.0).is_err());
        assert!(zeta_one_line(1e-9).is_err());
    }

    #[test]
    fn schwarz_reflection() {
        let a = zeta_one_line(3.0).unwrap();
        let b = zeta_one_line(-3.0).unwrap();
        assert!((a.conj() - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn magnitude_window_on_the_line() {
        // |ζ(1+it)| stays in a modest window for 1 ≤ t ≤ 100.
        let mut t = 1.0;
        while t <= 100.0 {
            let z = zeta_one_line(t).unwrap().norm();
            assert!((0.1..10.0).contains(&z), "|zeta(1+{t}i)| = {z}");
            t += 0.73;
        }
    }

    #[test]
    fn inverse_square_weight_smooth_through_zero() {
        // Matches the direct formula just outside the switchover…
        for &t in &[1e-3, 2e-3, 0.5] {
            let direct = 1.0 / zeta_one_line(t).unwrap().norm_sqr();
            let w = inv_zeta_one_line_sq(t);
            assert!((w - direct).abs() <= 1e-9 * direct);
        }
        // …vanishes quadratically at 0 with the γ-corrected constant…
        assert_eq!(inv_zeta_one_line_sq(0.0), 0.0);
        let t = 1e-4;
        let w = inv_zeta_one_line_sq(t);
        assert!((w / (t * t) - 1.0).abs() < 1e-3);
        // …and is even.
        assert_eq!(inv_zeta_one_line_sq(0.2), inv_zeta_one_line_sq(-0.2));
    }
}
