#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use volterra_merton::{JumpSpec, KernelSpec, ModelInputs, ModelParams};

/// Dormand–Prince 5(4) with step-size control; returns y at each requested time.
pub fn dopri45<F>(f: F, y0: &[f64], times: &[f64], rtol: f64, atol: f64) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let m = y0.len();
    let mut t = times[0];
    let mut y = y0.to_vec();
    let mut h: f64 = 1e-4;
    let mut out = vec![y.clone()];
    for &target in &times[1..] {
        while t < target {
            let step = h.min(target - t);
            let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    for q in 0..m {
                        ys[q] += step * A[s][j] * kj[q];
                    }
                }
                k.push(f(t + C[s] * step, &ys));
            }
            let mut y5 = y.clone();
            let mut err: f64 = 0.0;
            for q in 0..m {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * k[s][q];
                    d4 += B4[s] * k[s][q];
                }
                y5[q] += step * d5;
                let sc = atol + rtol * y[q].abs().max(y5[q].abs());
                err = err.max((step * (d5 - d4)).abs() / sc);
            }
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * fac;
        }
        out.push(y.clone());
    }
    out
}

/// e^A by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let norm = a.iter().flatten().map(|x| x.abs()).sum::<f64>();
    let mut s = 0;
    while norm / f64::from(1u32 << s) > 0.1 {
        s += 1;
    }
    let scale = f64::from(1u32 << s);
    let b = [[a[0][0] / scale, a[0][1] / scale], [a[1][0] / scale, a[1][1] / scale]];
    let mul = |x: &[[f64; 2]; 2], y: &[[f64; 2]; 2]| {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        r
    };
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    let mut sum = term;
    for k in 1..20 {
        term = mul(&term, &b);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = mul(&sum, &sum);
    }
    sum
}

/// log Γ(x) for x > 0, Lanczos g=7, n=9.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Σ_{k<terms} x^k / Γ(αk + β).
pub fn ml_series(alpha: f64, beta: f64, x: f64, terms: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..terms {
        let kf = k as f64;
        let mag = kf * x.abs().ln() - ln_gamma(alpha * kf + beta);
        let sign = if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        s += if x == 0.0 { if k == 0 { 1.0 / gamma(beta) } else { 0.0 } } else { sign * mag.exp() };
    }
    s
}

/// Composite trapezoid with `n` cells.
pub fn trapezoid_oracle<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for k in 1..n {
        s += f(a + k as f64 * h);
    }
    s * h
}

/// Running mean and standard error.
#[derive(Debug, Default, Clone, Copy)]
pub struct Stats {
    pub n: f64,
    pub sum: f64,
    pub sum2: f64,
}

impl Stats {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum2 += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n
    }

    pub fn var(&self) -> f64 {
        ((self.sum2 - self.n * self.mean().powi(2)) / (self.n - 1.0)).max(0.0)
    }

    pub fn se(&self) -> f64 {
        (self.var() / self.n).sqrt()
    }
}

/// Full-truncation Euler CIR dV = (μ - λV)dt + σ√V⁺ dW; returns V_T samples.
pub fn cir_euler(v0: f64, mu: f64, lambda: f64, sigma: f64, horizon: f64, n: usize, paths: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dt = horizon / n as f64;
    (0..paths)
        .map(|_| {
            let mut v = v0;
            for _ in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let vp = v.max(0.0);
                v += (mu - lambda * v) * dt + sigma * vp.sqrt() * dt.sqrt() * z;
            }
            v.max(0.0)
        })
        .collect()
}

/// One-asset model with a constant kernel (CIR when D = -λ).
pub fn cir_params(v0: f64, mu: f64, lambda: f64, sigma: f64, rho: f64, theta: f64, rate: f64) -> ModelParams {
    one_asset(KernelSpec::constant(), v0, mu, lambda, sigma, rho, theta, rate)
}

pub fn one_asset(kernel: KernelSpec, v0: f64, mu: f64, lambda: f64, sigma: f64, rho: f64, theta: f64, rate: f64) -> ModelParams {
    ModelParams::new(ModelInputs {
        kernels: vec![kernel],
        v0: vec![v0],
        mu0: vec![mu],
        drift: vec![-lambda],
        rho: vec![rho],
        theta: vec![theta],
        sigma_v: vec![sigma],
        varsigma: None,
        rate,
        jumps: JumpSpec::none(1),
    })
    .unwrap()
}
