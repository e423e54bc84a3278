//! Exponential-affine Laplace functional E[exp(∫₀^T V_sᵀ m(ds))] for test
//! measures m = c·ds + u·δ_T, and its Monte Carlo counterpart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericError, Result};
use crate::grid::{trapezoid, TimeGrid};
use crate::merton::g0_curve;
use crate::params::ModelParams;
use crate::riccati::{driver_laplace, jump_driver_term, solve_measure_riccati, RiccatiSolution};
use crate::sim::Simulator;

/// m(ds) = density·ds on [0, T] plus atom·δ_T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMeasure {
    pub density: Vec<f64>,
    pub atom: Vec<f64>,
}

impl TestMeasure {
    pub fn zero(d: usize) -> Self {
        TestMeasure { density: vec![0.0; d], atom: vec![0.0; d] }
    }

    pub fn density(c: Vec<f64>) -> Self {
        let d = c.len();
        TestMeasure { density: c, atom: vec![0.0; d] }
    }

    pub fn atom(u: Vec<f64>) -> Self {
        let d = u.len();
        TestMeasure { density: vec![0.0; d], atom: u }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        for (name, v) in [("laplace.c", &self.density), ("laplace.u", &self.atom)] {
            if v.len() != d {
                return Err(Error::invalid(name, format!("length {} does not match d = {d}", v.len())));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name}[{i}]"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// ψ(t) = u K(t) + ∫₀^t K(t-s)(c + F(T-s, ψ(s))) ds.
pub fn riccati_measure(params: &ModelParams, m: &TestMeasure, grid: &TimeGrid) -> Result<RiccatiSolution> {
    m.validate(params.dim())?;
    solve_measure_riccati(params, &m.density, &m.atom, grid)
}

/// exp(∫ g₀ᵀ m(ds) + ∫₀^T [∫ h(ψ(T-s)ᵀη) dν₀ + F(s, ψ(T-s))ᵀ g₀(s)] ds).
///
/// The g₀ part is exact; the second integral uses the trapezoid rule.
pub fn laplace_formula(params: &ModelParams, psi_m: &RiccatiSolution, m: &TestMeasure, grid: &TimeGrid) -> Result<f64> {
    m.validate(params.dim())?;
    if psi_m.grid != *grid {
        return Err(Error::invalid("grid", "Riccati and formula grids must be identical"));
    }
    if let Some(node) = psi_m.blow_up {
        return Err(NumericError::BlowUp { node, t: grid.t(node) }.into());
    }
    let d = params.dim();
    let horizon = grid.horizon();
    let g0 = g0_curve(params, grid);
    let mut exponent = 0.0;
    for i in 0..d {
        let int_g0 = params.v0[i] * horizon + params.mu0[i] * params.kernels[i].double_integral(horizon);
        exponent += m.density[i] * int_g0 + m.atom[i] * g0.values[grid.steps()][i];
    }
    let quad = params.jump_quadrature();
    let vals: Vec<f64> = (0..=grid.steps())
        .map(|k| {
            let psi = psi_m.reversed(k);
            let f = driver_laplace(grid.t(k), psi, params);
            jump_driver_term(psi, quad, 0, 1.0) + (0..d).map(|i| f[i] * g0.values[k][i]).sum::<f64>()
        })
        .collect();
    exponent += trapezoid(grid, &vals);
    let v = exponent.exp();
    if !v.is_finite() {
        return Err(NumericError::NonFinite(format!("Laplace exponent {exponent}")).into());
    }
    Ok(v)
}

/// Time discretization of ∫₀^T V_sᵀ c ds inside the Monte Carlo exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentRule {
    /// Σ_{k<n} V(t_k)ᵀc Δ.
    LeftEndpoint,
    /// Trapezoid over all nodes.
    #[default]
    Trapezoid,
}

/// Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
}

/// Sample mean and standard error of exp(∫ Vᵀc ds + V_Tᵀu) over simulated paths.
pub fn mc_laplace(params: &ModelParams, m: &TestMeasure, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<McEstimate> {
    mc_laplace_with(params, m, grid, n_paths, seed, ExponentRule::default())
}

pub fn mc_laplace_with(
    params: &ModelParams,
    m: &TestMeasure,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    rule: ExponentRule,
) -> Result<McEstimate> {
    let d = params.dim();
    m.validate(d)?;
    if n_paths == 0 {
        return Err(Error::invalid("mc.paths", "need at least one path"));
    }
    if m.density.iter().chain(&m.atom).all(|x| *x == 0.0) {
        return Ok(McEstimate { estimate: 1.0, se: 0.0 });
    }
    let sim = Simulator::new(params, grid)?;
    let n = grid.steps();
    let delta = grid.delta();
    let (mut sum, mut sum2) = (0.0, 0.0);
    let mut bad = None;
    sim.for_each_path(seed, 0, n_paths, |p| {
        let mut e = 0.0;
        for k in 0..=n {
            let w = match rule {
                ExponentRule::LeftEndpoint if k == n => 0.0,
                ExponentRule::LeftEndpoint => delta,
                ExponentRule::Trapezoid if k == 0 || k == n => 0.5 * delta,
                ExponentRule::Trapezoid => delta,
            };
            let row = &p.v[k * d..(k + 1) * d];
            for i in 0..d {
                e += w * m.density[i] * row[i];
            }
        }
        for i in 0..d {
            e += m.atom[i] * p.v[n * d + i];
        }
        let x = e.exp();
        if !x.is_finite() && bad.is_none() {
            bad = Some((p.path_id, e));
        }
        sum += x;
        sum2 += x * x;
    });
    if let Some((path, e)) = bad {
        return Err(NumericError::NonFinite(format!("exponent {e} on path {path} overflows")).into());
    }
    let np = n_paths as f64;
    let mean = sum / np;
    let var = if n_paths > 1 { ((sum2 - np * mean * mean) / (np - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { estimate: mean, se: (var / np).sqrt() })
}

/// Formula against Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub formula_value: f64,
    pub mc_estimate: f64,
    pub mc_se: f64,
    pub z_score: f64,
    pub pass: bool,
}

pub fn laplace_check(
    params: &ModelParams,
    m: &TestMeasure,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<LaplaceCheck> {
    let psi = riccati_measure(params, m, grid)?;
    let formula_value = laplace_formula(params, &psi, m, grid)?;
    let mc = mc_laplace(params, m, grid, n_paths, seed)?;
    let diff = mc.estimate - formula_value;
    let z_score = if mc.se > 0.0 {
        diff / mc.se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(LaplaceCheck { formula_value, mc_estimate: mc.estimate, mc_se: mc.se, z_score, pass: z_score.abs() <= 3.0 })
}
