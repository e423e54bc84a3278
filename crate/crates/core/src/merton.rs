//! Optimal strategies, value functions, indifference prices and the mean
//! variance curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, TimeGrid};
use crate::kernels::{resolvent, ProductWeights};
use crate::params::ModelParams;
use crate::riccati::{
    a_of_p, check_admissibility, driver, driver_exponential, jump_driver_term, jump_lambda, solve_riccati,
    AdmissibilityReport, RiccatiSolution, UtilityKind, UtilityProblem,
};
use crate::sim::MultiplierStrategy;

/// p used when a value report checks admissibility on its own.
pub const DEFAULT_ADMISSIBILITY_P: f64 = 1.1;

/// g₀(t_k) per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve {
    pub grid: TimeGrid,
    /// values[k][i] = g₀^i(t_k)
    pub values: Vec<Vec<f64>>,
}

/// g₀^i(t) = v0^i + μ0^i ∫₀^t K_i.
pub fn g0_curve(params: &ModelParams, grid: &TimeGrid) -> ForwardCurve {
    let values = grid
        .nodes()
        .map(|t| {
            (0..params.dim())
                .map(|i| {
                    let ik = if t > 0.0 { params.kernels[i].lag_moments(0.0, t).0 } else { 0.0 };
                    params.v0[i] + params.mu0[i] * ik
                })
                .collect()
        })
        .collect();
    ForwardCurve { grid: *grid, values }
}

/// Λ_t and U_t(e_m) at the mark nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFields {
    pub lambda: Vec<f64>,
    pub u: Vec<f64>,
}

/// Λ^i = σ^v_i ς^i ψ^i(T-t) √V^i and U(e) = ψ(T-t)ᵀη(e), at node k.
pub fn control_fields(params: &ModelParams, sol: &RiccatiSolution, k: usize, v: &[f64]) -> Result<ControlFields> {
    sol.require_complete()?;
    if v.iter().any(|x| *x < 0.0) {
        return Err(Error::invalid("V", "variance must be nonnegative"));
    }
    let psi = sol.reversed(k);
    let lambda = (0..params.dim())
        .map(|i| params.sigma_v[i] * params.varsigma[i] * psi[i] * v[i].sqrt())
        .collect();
    let s: f64 = psi.iter().sum();
    let u = params.jump_quadrature().eta.iter().map(|e| s * e).collect();
    Ok(ControlFields { lambda, u })
}

/// Optimal position at one node: α* and the amounts π* = α*/√V.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub alpha: Vec<f64>,
    pub pi: Vec<f64>,
}

fn position(mult: &[f64], v: &[f64]) -> Position {
    let alpha = mult.iter().zip(v).map(|(m, x)| m * x.max(0.0).sqrt()).collect();
    let pi = mult.iter().zip(v).map(|(m, x)| if *x > 0.0 { *m } else { 0.0 }).collect();
    Position { alpha, pi }
}

fn exponential_multiplier(params: &ModelParams, sol: &RiccatiSolution, gamma: f64, k: usize) -> Vec<f64> {
    let grid = &sol.grid;
    let disc = (-params.rate * (grid.horizon() - grid.t(k))).exp();
    let psi = sol.reversed(k);
    (0..params.dim())
        .map(|i| {
            disc / gamma
                * (params.theta[i] + gamma * params.rho[i] * params.sigma_v[i] * params.varsigma[i] * psi[i])
        })
        .collect()
}

fn power_multiplier(params: &ModelParams, sol: &RiccatiSolution, gamma: f64, k: usize) -> Vec<f64> {
    let psi = sol.reversed(k);
    (0..params.dim())
        .map(|i| (params.theta[i] + params.rho[i] * params.sigma_v[i] * params.varsigma[i] * psi[i]) / (1.0 - gamma))
        .collect()
}

fn utility_of(sol: &RiccatiSolution) -> Result<&UtilityProblem> {
    sol.utility.as_ref().ok_or_else(|| Error::invalid("solution", "Riccati solution carries no utility problem"))
}

/// α*_i = (1/γ) e^{-r(T-t)} (θ_i + γ ρ_i σ^v_i ς^i ψ^i(T-t)) √V^i at node k.
pub fn strategy_exponential(params: &ModelParams, sol: &RiccatiSolution, k: usize, v: &[f64]) -> Result<Position> {
    sol.require_complete()?;
    let u = utility_of(sol)?;
    Ok(position(&exponential_multiplier(params, sol, u.gamma, k), v))
}

/// α*_i = (θ_i + ρ_i σ^v_i ς^i ψ^i(T-t)) √V^i / (1-γ) at node k.
pub fn strategy_power(params: &ModelParams, sol: &RiccatiSolution, k: usize, v: &[f64]) -> Result<Position> {
    sol.require_complete()?;
    let u = utility_of(sol)?;
    Ok(position(&power_multiplier(params, sol, u.gamma, k), v))
}

/// α*_i = θ_i √V^i.
pub fn strategy_log(params: &ModelParams, v: &[f64]) -> Position {
    let mult: Vec<f64> = params.theta.iter().copied().collect();
    position(&mult, v)
}

/// Multipliers m_i(t_k) with α*_i = m_i √V^i on every node.
pub fn strategy_curve(params: &ModelParams, utility: &UtilityProblem, sol: Option<&RiccatiSolution>, grid: &TimeGrid) -> Result<MultiplierStrategy> {
    let multipliers = match utility.kind {
        UtilityKind::Log => (0..=grid.steps()).map(|_| params.theta.iter().copied().collect()).collect(),
        kind => {
            let sol = sol.ok_or_else(|| Error::invalid("solution", "exponential and power strategies need ψ"))?;
            sol.require_complete()?;
            (0..=grid.steps())
                .map(|k| match kind {
                    UtilityKind::Exponential => exponential_multiplier(params, sol, utility.gamma, k),
                    _ => power_multiplier(params, sol, utility.gamma, k),
                })
                .collect()
        }
    };
    Ok(MultiplierStrategy { multipliers })
}

/// Serialized value report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub utility: UtilityKind,
    pub gamma: f64,
    pub zeta: Vec<f64>,
    pub value: f64,
    pub y0: f64,
    pub t_max: Option<f64>,
    pub admissible: bool,
    /// Rows [t, m_1..m_d] with α*_i = m_i √V^i.
    pub strategy_curve: Vec<Vec<f64>>,
    pub diagnostics: Option<AdmissibilityReport>,
}

/// ∫₀^T [∫ h(ψ(T-s)ᵀη) dν₀ + Σ_i (a_i + F_i(s, ψ(T-s))) g₀^i(s)] ds by the
/// trapezoid rule, with a_i the forcing stored in the solution.
pub fn value_exponent(params: &ModelParams, sol: &RiccatiSolution, utility: &UtilityProblem) -> Result<f64> {
    sol.require_complete()?;
    let grid = &sol.grid;
    let g0 = g0_curve(params, grid);
    let lam = jump_lambda(utility);
    let quad = params.jump_quadrature();
    let vals: Vec<f64> = (0..=grid.steps())
        .map(|k| {
            let psi = sol.reversed(k);
            let f = driver(grid.t(k), psi, params, utility);
            let mut s = jump_driver_term(psi, quad, 0, lam);
            for i in 0..params.dim() {
                s += (sol.forcing[i] + f[i]) * g0.values[k][i];
            }
            s
        })
        .collect();
    let v = trapezoid(grid, &vals);
    if !v.is_finite() {
        return Err(crate::error::NumericError::NonFinite("value integrand".into()).into());
    }
    Ok(v)
}

fn curve_rows(grid: &TimeGrid, s: &MultiplierStrategy) -> Vec<Vec<f64>> {
    s.multipliers
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut row = vec![grid.t(k)];
            row.extend_from_slice(m);
            row
        })
        .collect()
}

/// Admissibility with the smallest integrability constant the boundedness
/// condition allows, a = a(p)·sup_t(θ² + (σ^v ς ψ)²).
pub fn auto_admissibility(params: &ModelParams, sol: &RiccatiSolution, p: f64) -> Result<AdmissibilityReport> {
    let sigma_norm: f64 = params.rho.iter().map(|r| r * r).sum();
    let mut sup: f64 = 0.0;
    for psi in &sol.psi {
        for i in 0..params.dim() {
            let l = params.sigma_v[i] * params.varsigma[i] * psi[i];
            sup = sup.max(params.theta[i].powi(2) + l * l);
        }
    }
    let a = (a_of_p(p, sigma_norm) * sup).max(f64::MIN_POSITIVE);
    check_admissibility(params, sol, a, p)
}

fn check_grid(sol: &RiccatiSolution, grid: &TimeGrid) -> Result<()> {
    if sol.grid != *grid {
        return Err(Error::invalid("grid", "value and Riccati grids must be identical"));
    }
    Ok(())
}

/// Θ₀ exp(γ ∫ ...) with Θ₀ = -(1/γ) exp(-γ e^{rT} x0).
pub fn value_exponential(params: &ModelParams, sol: &RiccatiSolution, x0: f64, grid: &TimeGrid) -> Result<ValueReport> {
    check_grid(sol, grid)?;
    let utility = utility_of(sol)?.clone();
    if utility.kind != UtilityKind::Exponential {
        return Err(Error::invalid("utility.kind", "value_exponential needs an exponential-utility solution"));
    }
    let g = utility.gamma;
    let y0 = value_exponent(params, sol, &utility)?;
    let theta0 = -(-g * params.rate_integral(grid.horizon()).exp() * x0).exp() / g;
    let diag = auto_admissibility(params, sol, DEFAULT_ADMISSIBILITY_P)?;
    let curve = strategy_curve(params, &utility, Some(sol), grid)?;
    Ok(ValueReport {
        utility: utility.kind,
        gamma: g,
        zeta: utility.zeta.clone(),
        value: theta0 * (g * y0).exp(),
        y0,
        t_max: None,
        admissible: diag.admissible,
        strategy_curve: curve_rows(grid, &curve),
        diagnostics: Some(diag),
    })
}

/// (x0^γ/γ) e^{γ r T} exp(∫ ...); refuses solutions that blew up.
pub fn value_power(params: &ModelParams, sol: &RiccatiSolution, x0: f64, grid: &TimeGrid) -> Result<ValueReport> {
    check_grid(sol, grid)?;
    let utility = utility_of(sol)?.clone();
    if utility.kind != UtilityKind::Power {
        return Err(Error::invalid("utility.kind", "value_power needs a power-utility solution"));
    }
    if !(x0 > 0.0) {
        return Err(Error::invalid("x0", format!("power utility needs x0 > 0, got {x0}")));
    }
    let g = utility.gamma;
    let y0 = g * params.rate_integral(grid.horizon()) + value_exponent(params, sol, &utility)?;
    let diag = auto_admissibility(params, sol, DEFAULT_ADMISSIBILITY_P)?;
    let curve = strategy_curve(params, &utility, Some(sol), grid)?;
    Ok(ValueReport {
        utility: utility.kind,
        gamma: g,
        zeta: utility.zeta.clone(),
        value: x0.powf(g) / g * y0.exp(),
        y0,
        t_max: sol.t_max(),
        admissible: diag.admissible,
        strategy_curve: curve_rows(grid, &curve),
        diagnostics: Some(diag),
    })
}

/// E[V_t] = g₀(t) + ∫₀^t R′_D(t-s) g₀(s) ds on the grid.
///
/// The singular part KD of R′ is integrated against g₀ with product
/// weights; the continuous remainder by the trapezoid rule.
pub fn expected_variance(params: &ModelParams, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let d = params.dim();
    let n = grid.steps();
    let g0 = g0_curve(params, grid).values;
    let res = resolvent(&params.kernels, &params.drift, grid)?;
    let weights: Vec<ProductWeights> = params.kernels.iter().map(|k| ProductWeights::new(k, grid)).collect();
    // (D g₀)(t_j)
    let dg: Vec<Vec<f64>> = g0
        .iter()
        .map(|g| (0..d).map(|i| (0..d).map(|j| params.drift[(i, j)] * g[j]).sum()).collect())
        .collect();
    let delta = grid.delta();
    let mut out = Vec::with_capacity(n + 1);
    out.push(g0[0].clone());
    for k in 1..=n {
        let mut row = g0[k].clone();
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..=k {
                s += weights[i].linear(j, k) * dg[j][i];
            }
            let mut r = 0.0;
            for j in 0..=k {
                let w = if j == 0 || j == k { 0.5 } else { 1.0 };
                let reg = &res.regular[k - j];
                let mut acc = 0.0;
                for m in 0..d {
                    acc += reg[(i, m)] * g0[j][m];
                }
                r += w * acc;
            }
            row[i] += s + r * delta;
        }
        out.push(row);
    }
    Ok(out)
}

/// log x0 + rT + Σ_i θ_i²/2 ∫₀^T E[V^i].
pub fn value_log(params: &ModelParams, x0: f64, grid: &TimeGrid) -> Result<ValueReport> {
    if !(x0 > 0.0) {
        return Err(Error::invalid("x0", format!("log utility needs x0 > 0, got {x0}")));
    }
    let d = params.dim();
    let ev = expected_variance(params, grid)?;
    let mut y0 = params.rate_integral(grid.horizon());
    for i in 0..d {
        let col: Vec<f64> = ev.iter().map(|r| r[i]).collect();
        y0 += params.theta[i].powi(2) / 2.0 * trapezoid(grid, &col);
    }
    let utility = UtilityProblem::log(d);
    let zero = RiccatiSolution {
        grid: *grid,
        psi: vec![vec![0.0; d]; grid.steps() + 1],
        utility: Some(utility.clone()),
        forcing: vec![0.0; d],
        blow_up: None,
    };
    let diag = auto_admissibility(params, &zero, DEFAULT_ADMISSIBILITY_P)?;
    let curve = strategy_curve(params, &utility, None, grid)?;
    Ok(ValueReport {
        utility: UtilityKind::Log,
        gamma: 0.0,
        zeta: utility.zeta,
        value: x0.ln() + y0,
        y0,
        t_max: None,
        admissible: diag.admissible,
        strategy_curve: curve_rows(grid, &curve),
        diagnostics: Some(diag),
    })
}

/// Value for any utility kind, solving ψ as needed.
pub fn value_for(params: &ModelParams, utility: &UtilityProblem, x0: f64, grid: &TimeGrid) -> Result<(ValueReport, Option<RiccatiSolution>)> {
    utility.validate(params)?;
    match utility.kind {
        UtilityKind::Log => Ok((value_log(params, x0, grid)?, None)),
        kind => {
            let sol = solve_riccati(params, utility, grid, &utility.forcing(params))?;
            let report = if kind == UtilityKind::Exponential {
                value_exponential(params, &sol, x0, grid)?
            } else {
                value_power(params, &sol, x0, grid)?
            };
            Ok((report, Some(sol)))
        }
    }
}

/// Indifference buying price computed two ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndifferencePrice {
    /// From 𝒱^{-Ξ}(x0 - p) = 𝒱^0(x0) with the value formula.
    pub price: f64,
    /// The closed-form price expression evaluated with Riccati forcings
    /// -θ²/2 and -ζ-θ²/2.
    pub formula_price: f64,
    pub discrepancy: f64,
    /// 𝒱^{-Ξ}(x0 - p) - 𝒱^0(x0) at the computed price.
    pub residual: f64,
}

/// Buying price of Ξ = ∫₀^T ζᵀV_s ds for an exponential-utility investor.
pub fn indifference_price(params: &ModelParams, utility: &UtilityProblem, x0: f64, grid: &TimeGrid) -> Result<IndifferencePrice> {
    if utility.kind != UtilityKind::Exponential {
        return Err(Error::invalid("utility.kind", "indifference pricing uses exponential utility"));
    }
    let d = params.dim();
    let g = utility.gamma;
    let zeta = &utility.zeta;
    if zeta.len() != d {
        return Err(Error::invalid("utility.zeta", format!("length {} does not match d = {d}", zeta.len())));
    }
    let disc = (-params.rate_integral(grid.horizon())).exp();

    let plain = UtilityProblem::exponential(g, vec![0.0; d])?;
    let short = UtilityProblem::exponential(g, zeta.iter().map(|z| -z).collect())?;
    plain.validate(params)?;
    short.validate(params)?;
    let sol0 = solve_riccati(params, &plain, grid, &plain.forcing(params))?;
    let sol1 = solve_riccati(params, &short, grid, &short.forcing(params))?;
    let i0 = value_exponent(params, &sol0, &plain)?;
    let i1 = value_exponent(params, &sol1, &short)?;
    let price = disc * (i0 - i1);
    let v_plain = value_exponential(params, &sol0, x0, grid)?.value;
    let v_short = value_exponential(params, &sol1, x0 - price, grid)?.value;

    // closed-form expression with its own Riccati forcings
    let f0: Vec<f64> = (0..d).map(|i| -params.theta[i].powi(2) / 2.0).collect();
    let f1: Vec<f64> = (0..d).map(|i| -zeta[i] - params.theta[i].powi(2) / 2.0).collect();
    let alt0 = solve_riccati(params, &plain, grid, &f0)?;
    let alt1 = solve_riccati(params, &short, grid, &f1)?;
    let g0 = g0_curve(params, grid);
    let quad = params.jump_quadrature();
    let vals: Vec<f64> = (0..=grid.steps())
        .map(|k| {
            let s = grid.t(k);
            let p0 = alt0.reversed(k);
            let p1 = alt1.reversed(k);
            let fa = driver_exponential(s, p0, params, &plain);
            let fb = driver_exponential(s, p1, params, &plain);
            let mut v = jump_driver_term(p0, quad, 0, g) - jump_driver_term(p1, quad, 0, g);
            for i in 0..d {
                v += (fa[i] - fb[i] + zeta[i]) * g0.values[k][i];
            }
            v
        })
        .collect();
    let formula_price = disc * trapezoid(grid, &vals);
    Ok(IndifferencePrice {
        price,
        formula_price,
        discrepancy: formula_price - price,
        residual: v_short - v_plain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::params::{JumpSpec, ModelInputs};

    fn cir(lambda: f64, mu: f64) -> ModelParams {
        ModelParams::new(ModelInputs {
            kernels: vec![KernelSpec::constant()],
            v0: vec![0.04],
            mu0: vec![mu],
            drift: vec![-lambda],
            rho: vec![-0.5],
            theta: vec![0.2],
            sigma_v: vec![0.3],
            varsigma: None,
            rate: 0.0,
            jumps: JumpSpec::none(1),
        })
        .unwrap()
    }

    #[test]
    fn g0_fractional_value() {
        let p = ModelParams::reference(0.0, 0.0);
        let g = g0_curve(&p, &TimeGrid::new(1.0, 10).unwrap());
        assert_eq!(g.values[0], vec![0.01, 0.03]);
        let expect = 0.01 + 2.0 / statrs::function::gamma::gamma(1.6);
        assert!((g.values[10][0] - expect).abs() < 1e-12);
    }

    #[test]
    fn expected_variance_cir_mean() {
        let (lam, mu) = (1.5, 0.06);
        let p = cir(lam, mu);
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let ev = expected_variance(&p, &grid).unwrap();
        for k in 0..=400 {
            let t = grid.t(k);
            let exact = mu / lam + (0.04 - mu / lam) * (-lam * t).exp();
            assert!((ev[k][0] - exact).abs() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn strategy_log_arithmetic() {
        let p = ModelParams::reference(0.0, 0.0);
        let pos = strategy_log(&p, &[0.01, 0.03]);
        assert!((pos.alpha[0] - 0.01).abs() < 1e-15);
        assert!((pos.alpha[1] - 0.1 * 0.03_f64.sqrt()).abs() < 1e-15);
        let zero = strategy_log(&p, &[0.0, 0.0]);
        assert_eq!(zero.alpha, vec![0.0, 0.0]);
        assert_eq!(zero.pi, vec![0.0, 0.0]);
    }

    #[test]
    fn indifference_zero_claim() {
        let p = ModelParams::reference(0.0, 0.0);
        let u = UtilityProblem::exponential(0.2, vec![0.0, 0.0]).unwrap();
        let r = indifference_price(&p, &u, 1.0, &TimeGrid::new(1.0, 50).unwrap()).unwrap();
        assert_eq!(r.price, 0.0);
    }
}
