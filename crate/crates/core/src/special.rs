//! Special functions: gamma wrappers, the two-parameter Mittag-Leffler
//! function, and Gauss–Hermite nodes for Gaussian mark laws.

use statrs::function::gamma::{gamma as statrs_gamma, ln_gamma};

use crate::error::NumericError;

/// Γ(x) for x > 0 or any non-pole negative argument.
pub fn gamma(x: f64) -> f64 {
    statrs_gamma(x)
}

/// 1/Γ(x), zero at the poles x = 0, -1, -2, ...
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else if x > 0.0 {
        (-ln_gamma(x)).exp()
    } else {
        1.0 / statrs_gamma(x)
    }
}

/// Largest |x| accepted by [`mittag_leffler`].
pub const MITTAG_LEFFLER_MAX_ARG: f64 = 50.0;

/// E_{α,β}(x) = Σ_k x^k / Γ(αk + β) by direct summation.
///
/// The series is summed with compensation until the terms are decreasing and
/// fall below 1e-16 relative to the running sum. Large negative arguments
/// cancel catastrophically in double precision; when the largest term
/// dwarfs the result by more than 1e8 the value is refused.
pub fn mittag_leffler(alpha: f64, beta: f64, x: f64) -> Result<f64, NumericError> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(NumericError::Domain(format!("mittag_leffler: alpha = {alpha} must be > 0")));
    }
    if !(x.abs() <= MITTAG_LEFFLER_MAX_ARG) {
        return Err(NumericError::OutOfRange(format!(
            "mittag_leffler: |x| = {} exceeds {MITTAG_LEFFLER_MAX_ARG}",
            x.abs()
        )));
    }
    if x == 0.0 {
        return Ok(recip_gamma(beta));
    }
    let ln_abs = x.abs().ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut max_term: f64 = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..100_000u32 {
        let kf = f64::from(k);
        let arg = alpha * kf + beta;
        let mag = if arg > 0.0 {
            (kf * ln_abs - ln_gamma(arg)).exp()
        } else {
            x.abs().powf(kf) * recip_gamma(arg).abs()
        };
        let sign = if arg > 0.0 { 1.0 } else { recip_gamma(arg).signum() };
        let term = if x < 0.0 && k % 2 == 1 { -sign * mag } else { sign * mag };
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        max_term = max_term.max(mag);
        let total = sum + comp;
        if mag < prev && mag <= 1e-16 * total.abs() && arg > 1.0 {
            if max_term > 1e8 * total.abs() {
                return Err(NumericError::PrecisionLoss(format!(
                    "mittag_leffler({alpha}, {beta}, {x}): series cancellation exceeds double precision"
                )));
            }
            return Ok(total);
        }
        prev = mag;
    }
    Err(NumericError::NoConvergence("mittag_leffler series".into()))
}

/// Gauss–Hermite rule for the standard normal law: nodes e_m and weights
/// w_m ≥ 0 with Σ w_m = 1, exact for polynomials of degree < 2n.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Physicists' rule for weight e^{-x²} via Newton on the orthonormal
    // recurrence, then rescaled.
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let nodes: Vec<f64> = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights: Vec<f64> = w.iter().rev().map(|v| v / sqrt_pi).collect();
    (nodes, weights)
}
