//! Riccati–Volterra equations ψ(t) = ∫₀^t K(t-s) f(s, ψ(s)) ds solved by the
//! fractional Adams predictor–corrector (one corrector pass).

use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericError, Result};
use crate::grid::TimeGrid;
use crate::kernels::{KernelSpec, ProductWeights};
use crate::params::{JumpMeasureQuadrature, ModelParams};
use crate::special::gamma;

/// |ψ| above this (or any non-finite value) marks an explosion.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Exponential,
    Power,
    Log,
}

impl std::fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UtilityKind::Exponential => "exponential",
            UtilityKind::Power => "power",
            UtilityKind::Log => "log",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityProblem {
    pub kind: UtilityKind,
    pub gamma: f64,
    pub zeta: Vec<f64>,
}

impl UtilityProblem {
    pub fn exponential(gamma: f64, zeta: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("utility.gamma", format!("exponential utility needs gamma > 0, got {gamma}")));
        }
        Ok(UtilityProblem { kind: UtilityKind::Exponential, gamma, zeta })
    }

    pub fn power(gamma: f64, d: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid("utility.gamma", format!("power utility needs 0 < gamma < 1, got {gamma}")));
        }
        Ok(UtilityProblem { kind: UtilityKind::Power, gamma, zeta: vec![0.0; d] })
    }

    pub fn log(d: usize) -> Self {
        UtilityProblem { kind: UtilityKind::Log, gamma: 0.0, zeta: vec![0.0; d] }
    }

    /// Check the problem against a model, naming the violated field.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let d = params.dim();
        if self.zeta.len() != d {
            return Err(Error::invalid("utility.zeta", format!("length {} does not match d = {d}", self.zeta.len())));
        }
        match self.kind {
            UtilityKind::Exponential => {
                if !(self.gamma > 0.0 && self.gamma.is_finite()) {
                    return Err(Error::invalid("utility.gamma", "exponential utility needs gamma > 0"));
                }
                for i in 0..d {
                    let cap = params.theta[i].powi(2) / (2.0 * self.gamma);
                    if !(self.zeta[i] <= cap) {
                        return Err(Error::invalid(
                            format!("utility.zeta[{i}]"),
                            format!(
                                "zeta[{i}] = {} violates zeta[{i}] <= theta[{i}]^2/(2*gamma) = {cap}",
                                self.zeta[i]
                            ),
                        ));
                    }
                }
            }
            UtilityKind::Power => {
                if !(self.gamma > 0.0 && self.gamma < 1.0) {
                    return Err(Error::invalid("utility.gamma", format!("power utility needs 0 < gamma < 1, got {}", self.gamma)));
                }
                if self.zeta.iter().any(|z| *z != 0.0) {
                    return Err(Error::invalid("utility.zeta", "power utility takes no terminal claim (zeta must be 0)"));
                }
            }
            UtilityKind::Log => {}
        }
        Ok(())
    }

    /// Constant forcing a_i of the Riccati equation.
    pub fn forcing(&self, params: &ModelParams) -> Vec<f64> {
        let g = self.gamma;
        (0..params.dim())
            .map(|i| {
                let th2 = params.theta[i].powi(2);
                match self.kind {
                    UtilityKind::Exponential => self.zeta[i] - th2 / (2.0 * g),
                    UtilityKind::Power => g * th2 / (2.0 * (1.0 - g)),
                    UtilityKind::Log => 0.0,
                }
            })
            .collect()
    }
}

/// h_λ(x) = (e^{λx} - λx - 1)/λ.
pub fn h_lambda(lambda: f64, x: f64) -> f64 {
    let z = lambda * x;
    if z.abs() < 1e-4 {
        // λx²/2 + λ²x³/6
        x * x * lambda * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / lambda - x
    }
}

/// ∫ h_λ(ψᵀη(e)) ν_k(de) by the mark quadrature.
pub fn jump_driver_term(psi: &[f64], quad: &JumpMeasureQuadrature, k: usize, lambda: f64) -> f64 {
    let s: f64 = psi.iter().sum();
    if s == 0.0 {
        return 0.0;
    }
    quad.weights[k]
        .iter()
        .zip(&quad.eta)
        .filter(|(w, e)| **w != 0.0 && **e != 0.0)
        .map(|(w, e)| w * h_lambda(lambda, s * e))
        .sum()
}

fn dt_psi(params: &ModelParams, psi: &[f64], i: usize) -> f64 {
    let d = params.dim();
    (0..d).map(|j| params.drift[(j, i)] * psi[j]).sum()
}

/// F(s, ψ) for exponential utility.
pub fn driver_exponential(_s: f64, psi: &[f64], params: &ModelParams, utility: &UtilityProblem) -> Vec<f64> {
    let g = utility.gamma;
    let quad = params.jump_quadrature();
    (0..params.dim())
        .map(|i| {
            let sv = params.sigma_v[i];
            let vs = params.varsigma[i];
            let rho = params.rho[i];
            let sp = vs * psi[i];
            -params.theta[i] * rho * sv * sp
                + dt_psi(params, psi, i)
                + g * sv * sv * (1.0 - rho * rho) * sp * sp / 2.0
                + jump_driver_term(psi, quad, i + 1, g)
        })
        .collect()
}

/// F(s, ψ) for power utility.
pub fn driver_power(_s: f64, psi: &[f64], params: &ModelParams, utility: &UtilityProblem) -> Vec<f64> {
    let g = utility.gamma;
    let q = g / (1.0 - g);
    let quad = params.jump_quadrature();
    (0..params.dim())
        .map(|i| {
            let sv = params.sigma_v[i];
            let rho = params.rho[i];
            let sp = params.varsigma[i] * psi[i];
            q * params.theta[i] * rho * sv * sp
                + dt_psi(params, psi, i)
                + sv * sv / 2.0 * (sp * sp + q * rho * rho * sp * sp)
                + jump_driver_term(psi, quad, i + 1, 1.0)
        })
        .collect()
}

/// F(s, ψ) of the Laplace-transform Riccati equation.
pub fn driver_laplace(_s: f64, psi: &[f64], params: &ModelParams) -> Vec<f64> {
    let quad = params.jump_quadrature();
    (0..params.dim())
        .map(|i| {
            let sv = params.sigma_v[i];
            let sp = params.varsigma[i] * psi[i];
            dt_psi(params, psi, i) + sv * sv * sp * sp / 2.0 + jump_driver_term(psi, quad, i + 1, 1.0)
        })
        .collect()
}

/// Driver of the given utility problem (zero for log utility).
pub fn driver(s: f64, psi: &[f64], params: &ModelParams, utility: &UtilityProblem) -> Vec<f64> {
    match utility.kind {
        UtilityKind::Exponential => driver_exponential(s, psi, params, utility),
        UtilityKind::Power => driver_power(s, psi, params, utility),
        UtilityKind::Log => vec![0.0; params.dim()],
    }
}

/// Jump-rate exponent λ used by the utility's h-function.
pub fn jump_lambda(utility: &UtilityProblem) -> f64 {
    match utility.kind {
        UtilityKind::Exponential => utility.gamma,
        _ => 1.0,
    }
}

/// Explicit fractional Adams weights for the step to node k+1 on a pure
/// fractional kernel: corrector weights a_{j,k+1}, j = 0..=k+1, and
/// predictor weights b_{j,k+1}, j = 0..=k.
pub fn adams_weights(alpha: f64, delta: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
    let ca = delta.powf(alpha) / gamma(alpha + 2.0);
    let cb = delta.powf(alpha) / gamma(alpha + 1.0);
    let kf = k as f64;
    let a1 = alpha + 1.0;
    let mut a = Vec::with_capacity(k + 2);
    for j in 0..=k + 1 {
        let w = if j == 0 {
            kf.powf(a1) - (kf - alpha) * (kf + 1.0).powf(alpha)
        } else if j <= k {
            let m = (k - j) as f64;
            (m + 2.0).powf(a1) + m.powf(a1) - 2.0 * (m + 1.0).powf(a1)
        } else {
            1.0
        };
        a.push(ca * w);
    }
    let b = (0..=k)
        .map(|j| {
            let m = (k - j) as f64;
            cb * ((m + 1.0).powf(alpha) - m.powf(alpha))
        })
        .collect();
    (a, b)
}

/// Solution of a Riccati–Volterra equation on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    /// psi[j][i] = ψ^i(t_j); shorter than n+1 when the solution blew up.
    pub psi: Vec<Vec<f64>>,
    pub utility: Option<UtilityProblem>,
    pub forcing: Vec<f64>,
    /// First node at which |ψ| exceeded the blow-up threshold.
    pub blow_up: Option<usize>,
}

impl RiccatiSolution {
    pub fn is_complete(&self) -> bool {
        self.blow_up.is_none()
    }

    /// Time of the first exploding node, if any.
    pub fn t_max(&self) -> Option<f64> {
        self.blow_up.map(|k| self.grid.t(k))
    }

    /// ψ(t_j).
    pub fn at(&self, j: usize) -> &[f64] {
        &self.psi[j]
    }

    /// ψ(T - t_k) = ψ(t_{n-k}).
    pub fn reversed(&self, k: usize) -> &[f64] {
        &self.psi[self.grid.steps() - k]
    }

    /// Column of asset i.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.psi.iter().map(|p| p[i]).collect()
    }

    pub(crate) fn require_complete(&self) -> Result<()> {
        match self.blow_up {
            None => Ok(()),
            Some(node) => Err(NumericError::BlowUp { node, t: self.grid.t(node) }.into()),
        }
    }
}

fn exploded(v: &[f64]) -> bool {
    v.iter().any(|x| !x.is_finite() || x.abs() > BLOW_UP_THRESHOLD)
}

/// ψ_i(t_k) = source(i, k) + ∫₀^{t_k} K_i(t_k - s) f_i(s, ψ(s)) ds by PECE.
///
/// `f(k, y)` returns the integrand vector at node k. Stops at the first
/// exploding node and reports it.
pub(crate) fn adams_pece<S, F>(
    grid: &TimeGrid,
    kernels: &[KernelSpec],
    source: S,
    mut f: F,
) -> (Vec<Vec<f64>>, Option<usize>)
where
    S: Fn(usize, usize) -> f64,
    F: FnMut(usize, &[f64]) -> Vec<f64>,
{
    let n = grid.steps();
    let d = kernels.len();
    let weights: Vec<ProductWeights> = kernels.iter().map(|k| ProductWeights::new(k, grid)).collect();
    let y0: Vec<f64> = (0..d).map(|i| source(i, 0)).collect();
    if exploded(&y0) {
        return (Vec::new(), Some(0));
    }
    let mut fv = vec![f(0, &y0)];
    let mut psi = Vec::with_capacity(n + 1);
    psi.push(y0);
    let mut pred = vec![0.0; d];
    for k in 1..=n {
        for (i, w) in weights.iter().enumerate() {
            let mut s = source(i, k);
            for (j, fj) in fv.iter().enumerate() {
                s += w.rectangle(j, k) * fj[i];
            }
            pred[i] = s;
        }
        if exploded(&pred) {
            return (psi, Some(k));
        }
        let fp = f(k, &pred);
        let mut y = vec![0.0; d];
        for (i, w) in weights.iter().enumerate() {
            let mut s = source(i, k) + w.linear(k, k) * fp[i];
            for (j, fj) in fv.iter().enumerate() {
                s += w.linear(j, k) * fj[i];
            }
            y[i] = s;
        }
        if exploded(&y) {
            return (psi, Some(k));
        }
        fv.push(f(k, &y));
        psi.push(y);
    }
    (psi, None)
}

/// Solve the utility Riccati equation with explicit forcing constants.
///
/// An exploding exponential solution is an error; an exploding power
/// solution is returned with `blow_up` set.
pub fn solve_riccati(
    params: &ModelParams,
    utility: &UtilityProblem,
    grid: &TimeGrid,
    forcing: &[f64],
) -> Result<RiccatiSolution> {
    let d = params.dim();
    if forcing.len() != d {
        return Err(Error::invalid("forcing", format!("length {} does not match d = {d}", forcing.len())));
    }
    if utility.zeta.len() != d {
        return Err(Error::invalid("utility.zeta", format!("length {} does not match d = {d}", utility.zeta.len())));
    }
    if utility.kind == UtilityKind::Log {
        return Err(Error::invalid("utility.kind", "log utility has no Riccati equation"));
    }
    let horizon = grid.horizon();
    let (psi, blow_up) = adams_pece(grid, &params.kernels, |_, _| 0.0, |k, y| {
        let s = horizon - grid.t(k);
        let mut out = driver(s, y, params, utility);
        for (o, a) in out.iter_mut().zip(forcing) {
            *o += a;
        }
        out
    });
    if let (UtilityKind::Exponential, Some(node)) = (utility.kind, blow_up) {
        return Err(NumericError::BlowUp { node, t: grid.t(node) }.into());
    }
    Ok(RiccatiSolution {
        grid: *grid,
        psi,
        utility: Some(utility.clone()),
        forcing: forcing.to_vec(),
        blow_up,
    })
}

/// Validate the utility problem and solve with its own forcing.
pub fn solve_utility(params: &ModelParams, utility: &UtilityProblem, grid: &TimeGrid) -> Result<RiccatiSolution> {
    utility.validate(params)?;
    let forcing = utility.forcing(params);
    solve_riccati(params, utility, grid, &forcing)
}

/// Solve ψ(t) = u·K(t) + ∫₀^t K(t-s)(c + F(T-s, ψ(s))) ds with the Laplace driver.
pub fn solve_measure_riccati(
    params: &ModelParams,
    density: &[f64],
    atom: &[f64],
    grid: &TimeGrid,
) -> Result<RiccatiSolution> {
    let d = params.dim();
    if density.len() != d {
        return Err(Error::invalid("laplace.density", format!("length {} does not match d = {d}", density.len())));
    }
    if atom.len() != d {
        return Err(Error::invalid("laplace.atom", format!("length {} does not match d = {d}", atom.len())));
    }
    for i in 0..d {
        if atom[i] != 0.0 && params.kernels[i].is_singular() {
            return Err(Error::invalid(
                format!("laplace.atom[{i}]"),
                "an atom at T needs a kernel bounded at 0 (alpha = 1); K*m is not continuous otherwise",
            ));
        }
    }
    let horizon = grid.horizon();
    let kernels = &params.kernels;
    let (psi, blow_up) = adams_pece(
        grid,
        kernels,
        |i, k| if atom[i] == 0.0 { 0.0 } else { atom[i] * kernels[i].value(grid.t(k)) },
        |k, y| {
            let s = horizon - grid.t(k);
            let mut out = driver_laplace(s, y, params);
            for (o, c) in out.iter_mut().zip(density) {
                *o += c;
            }
            out
        },
    );
    Ok(RiccatiSolution { grid: *grid, psi, utility: None, forcing: density.to_vec(), blow_up })
}

/// Outcome of the boundedness and integrability checks on a solved ψ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub p: f64,
    pub a_bound: f64,
    /// |Σ| = tr(ΣᵀΣ) with Σ = diag(ρ).
    pub sigma_norm: f64,
    pub a_p: f64,
    /// max_i sup_t (θ_i² + (σ^v_i ς^i ψ^i(T-t))²).
    pub sup_value: f64,
    pub threshold: f64,
    pub bounded: bool,
    /// Whether E[exp(a ∫ Σ_i V^i)] is finite, judged by a non-exploding
    /// Laplace Riccati solution with density a.
    pub integrable: bool,
    /// ∫ exp(p sup_t |U_t(e)|) ν_k(de) for k = 0..d.
    pub jump_moments: Vec<f64>,
    pub jump_moments_finite: bool,
    pub admissible: bool,
}

/// a(p) = max[p(2+|Σ|), 2(8p²-2p)(1+|Σ|²), p(1+|Σ|²)].
pub fn a_of_p(p: f64, sigma_norm: f64) -> f64 {
    let s2 = 1.0 + sigma_norm * sigma_norm;
    (p * (2.0 + sigma_norm)).max(2.0 * (8.0 * p * p - 2.0 * p) * s2).max(p * s2)
}

pub fn check_admissibility(params: &ModelParams, sol: &RiccatiSolution, a_bound: f64, p: f64) -> Result<AdmissibilityReport> {
    if !(p > 1.0) {
        return Err(Error::invalid("p", format!("{p} must exceed 1")));
    }
    if !(a_bound > 0.0) {
        return Err(Error::invalid("a_bound", format!("{a_bound} must be > 0")));
    }
    let d = params.dim();
    let sigma_norm: f64 = params.rho.iter().map(|r| r * r).sum();
    let a_p = a_of_p(p, sigma_norm);
    let mut sup_value: f64 = 0.0;
    let mut sup_sum: f64 = 0.0;
    for psi in &sol.psi {
        for i in 0..d {
            let l = params.sigma_v[i] * params.varsigma[i] * psi[i];
            sup_value = sup_value.max(params.theta[i].powi(2) + l * l);
        }
        sup_sum = sup_sum.max(psi.iter().sum::<f64>().abs());
    }
    let threshold = a_bound / a_p;
    let bounded = sol.is_complete() && sup_value <= threshold;

    let density = vec![a_bound; d];
    let integrable = solve_measure_riccati(params, &density, &vec![0.0; d], &sol.grid)?.is_complete();

    let quad = params.jump_quadrature();
    let jump_moments: Vec<f64> = quad
        .weights
        .iter()
        .map(|w| w.iter().zip(&quad.eta).map(|(w, e)| w * (p * sup_sum * e).exp()).sum())
        .collect();
    let jump_moments_finite = jump_moments.iter().all(|v: &f64| v.is_finite());
    Ok(AdmissibilityReport {
        p,
        a_bound,
        sigma_norm,
        a_p,
        sup_value,
        threshold,
        bounded,
        integrable,
        admissible: bounded && integrable && jump_moments_finite,
        jump_moments,
        jump_moments_finite,
    })
}
