use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::special::gauss_hermite_normal;

/// Number of Gauss–Hermite nodes used for the Gaussian mark law.
pub const MARK_NODES: usize = 64;

/// Poisson jump specification: marks e ~ N(0,1) arriving at rate `intensity`,
/// jump size η^i(e) = κ·max(e, 0) on every asset.
///
/// `state_intensity[i]` scales the state-dependent compensator
/// ν_i = state_intensity[i]·N(0,1). Those measures enter the Riccati drivers
/// only; the simulator requires them to vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub intensity: f64,
    pub kappa: f64,
    pub state_intensity: Vec<f64>,
}

impl JumpSpec {
    pub fn none(d: usize) -> Self {
        JumpSpec { intensity: 0.0, kappa: 0.0, state_intensity: vec![0.0; d] }
    }

    pub fn gaussian(d: usize, intensity: f64, kappa: f64) -> Self {
        JumpSpec { intensity, kappa, state_intensity: vec![0.0; d] }
    }

    /// η(e), identical for every asset.
    #[inline]
    pub fn eta(&self, e: f64) -> f64 {
        self.kappa * e.max(0.0)
    }

    /// ∫ η dν₀ = β κ E[e⁺] = β κ / √(2π).
    pub fn compensator(&self) -> f64 {
        self.intensity * self.kappa / (2.0 * std::f64::consts::PI).sqrt()
    }

    pub fn is_active(&self) -> bool {
        self.intensity > 0.0 && self.kappa != 0.0
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::invalid("jumps.intensity", format!("{} must be >= 0 and finite", self.intensity)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid("jumps.kappa", format!("{} must be >= 0 (jump sizes are nonnegative)", self.kappa)));
        }
        if self.state_intensity.len() != d {
            return Err(Error::invalid(
                "jumps.state_intensity",
                format!("length {} does not match d = {d}", self.state_intensity.len()),
            ));
        }
        for (i, v) in self.state_intensity.iter().enumerate() {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("jumps.state_intensity[{i}]"), format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Quadrature of the jump measures ν_k, k = 0..d, on shared mark nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasureQuadrature {
    /// Mark nodes e_m.
    pub nodes: Vec<f64>,
    /// η(e_m) at every node.
    pub eta: Vec<f64>,
    /// weights[k][m] ≥ 0 approximating ν_k(de); Σ_m weights[k][m] equals ν_k's mass.
    pub weights: Vec<Vec<f64>>,
}

impl JumpMeasureQuadrature {
    pub fn new(jumps: &JumpSpec) -> Self {
        let (nodes, w) = gauss_hermite_normal(MARK_NODES);
        let eta = nodes.iter().map(|&e| jumps.eta(e)).collect();
        let mut weights = Vec::with_capacity(jumps.state_intensity.len() + 1);
        weights.push(w.iter().map(|x| x * jumps.intensity).collect());
        for s in &jumps.state_intensity {
            weights.push(w.iter().map(|x| x * s).collect());
        }
        JumpMeasureQuadrature { nodes, eta, weights }
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.weights[k].iter().sum()
    }

    /// True when ν_k contributes nothing for any ψ.
    pub fn is_null(&self, k: usize) -> bool {
        self.weights[k].iter().zip(&self.eta).all(|(w, e)| *w == 0.0 || *e == 0.0)
    }
}

/// Market and variance model parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub kernels: Vec<KernelSpec>,
    pub v0: DVector<f64>,
    pub mu0: DVector<f64>,
    pub drift: DMatrix<f64>,
    pub rho: DVector<f64>,
    pub theta: DVector<f64>,
    pub sigma_v: DVector<f64>,
    /// Constant per-asset volatility scaling ς^i.
    pub varsigma: DVector<f64>,
    pub rate: f64,
    pub jumps: JumpSpec,
    quad: JumpMeasureQuadrature,
}

/// Plain inputs for [`ModelParams::new`].
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub kernels: Vec<KernelSpec>,
    pub v0: Vec<f64>,
    pub mu0: Vec<f64>,
    /// Row-major d×d drift matrix D.
    pub drift: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma_v: Vec<f64>,
    pub varsigma: Option<Vec<f64>>,
    pub rate: f64,
    pub jumps: JumpSpec,
}

fn check_len(field: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::invalid(field, format!("length {} does not match d = {d}", v.len())));
    }
    Ok(())
}

fn check_each(field: &str, v: &[f64], ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    for (i, x) in v.iter().enumerate() {
        if !ok(*x) {
            return Err(Error::invalid(format!("{field}[{i}]"), format!("{what} (got {x})")));
        }
    }
    Ok(())
}

impl ModelParams {
    pub fn new(inp: ModelInputs) -> Result<Self> {
        let d = inp.kernels.len();
        if d == 0 {
            return Err(Error::invalid("model.d", "at least one asset is required"));
        }
        check_len("model.v0", &inp.v0, d)?;
        check_len("model.mu0", &inp.mu0, d)?;
        check_len("model.rho", &inp.rho, d)?;
        check_len("model.theta", &inp.theta, d)?;
        check_len("model.sigma_v", &inp.sigma_v, d)?;
        if inp.drift.len() != d * d {
            return Err(Error::invalid("model.D", format!("length {} does not match d*d = {}", inp.drift.len(), d * d)));
        }
        let varsigma = inp.varsigma.unwrap_or_else(|| vec![1.0; d]);
        check_len("model.varsigma", &varsigma, d)?;

        check_each("model.v0", &inp.v0, |x| x >= 0.0 && x.is_finite(), "must be >= 0")?;
        check_each("model.mu0", &inp.mu0, |x| x >= 0.0 && x.is_finite(), "must be >= 0")?;
        check_each("model.rho", &inp.rho, |x| (-1.0..=1.0).contains(&x), "out of [-1,1]")?;
        check_each("model.theta", &inp.theta, |x| x >= 0.0 && x.is_finite(), "must be >= 0")?;
        check_each("model.sigma_v", &inp.sigma_v, |x| x >= 0.0 && x.is_finite(), "must be >= 0")?;
        check_each("model.varsigma", &varsigma, |x| x > 0.0 && x.is_finite(), "must be > 0")?;
        check_each("model.D", &inp.drift, f64::is_finite, "must be finite")?;
        for i in 0..d {
            for j in 0..d {
                let v = inp.drift[i * d + j];
                if i != j && v < 0.0 {
                    return Err(Error::invalid(
                        format!("model.D[{i}][{j}]"),
                        format!("off-diagonal entry {v} must be >= 0"),
                    ));
                }
            }
        }
        if !inp.rate.is_finite() {
            return Err(Error::invalid("model.r", "must be finite"));
        }
        inp.jumps.validate(d)?;
        let quad = JumpMeasureQuadrature::new(&inp.jumps);
        Ok(ModelParams {
            kernels: inp.kernels,
            v0: DVector::from_vec(inp.v0),
            mu0: DVector::from_vec(inp.mu0),
            drift: DMatrix::from_row_slice(d, d, &inp.drift),
            rho: DVector::from_vec(inp.rho),
            theta: DVector::from_vec(inp.theta),
            sigma_v: DVector::from_vec(inp.sigma_v),
            varsigma: DVector::from_vec(varsigma),
            rate: inp.rate,
            jumps: inp.jumps,
            quad,
        })
    }

    pub fn dim(&self) -> usize {
        self.kernels.len()
    }

    pub fn jump_quadrature(&self) -> &JumpMeasureQuadrature {
        &self.quad
    }

    /// Copy with a different jump specification.
    pub fn with_jumps(&self, jumps: JumpSpec) -> Result<Self> {
        jumps.validate(self.dim())?;
        let mut p = self.clone();
        p.quad = JumpMeasureQuadrature::new(&jumps);
        p.jumps = jumps;
        Ok(p)
    }

    /// ∫₀^t r = r·t.
    pub fn rate_integral(&self, t: f64) -> f64 {
        self.rate * t
    }

    pub fn inputs(&self) -> ModelInputs {
        let d = self.dim();
        let mut drift = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                drift.push(self.drift[(i, j)]);
            }
        }
        ModelInputs {
            kernels: self.kernels.clone(),
            v0: self.v0.iter().copied().collect(),
            mu0: self.mu0.iter().copied().collect(),
            drift,
            rho: self.rho.iter().copied().collect(),
            theta: self.theta.iter().copied().collect(),
            sigma_v: self.sigma_v.iter().copied().collect(),
            varsigma: Some(self.varsigma.iter().copied().collect()),
            rate: self.rate,
            jumps: self.jumps.clone(),
        }
    }

    /// Two-asset reference configuration: α = (0.6, 0.9), V0 = (0.01, 0.03),
    /// μ0 = (2.0, 2.5), D = diag(-0.2, -0.6), ρ = (-0.7, -0.55),
    /// θ = (0.1, 0.1), σ^v = (0.4, 0.2), r = 0.02, Gaussian marks.
    pub fn reference(intensity: f64, kappa: f64) -> Self {
        ModelParams::new(ModelInputs {
            kernels: vec![
                KernelSpec::fractional(0.6).expect("valid alpha"),
                KernelSpec::fractional(0.9).expect("valid alpha"),
            ],
            v0: vec![0.01, 0.03],
            mu0: vec![2.0, 2.5],
            drift: vec![-0.2, 0.0, 0.0, -0.6],
            rho: vec![-0.7, -0.55],
            theta: vec![0.1, 0.1],
            sigma_v: vec![0.4, 0.2],
            varsigma: None,
            rate: 0.02,
            jumps: JumpSpec::gaussian(2, intensity, kappa),
        })
        .expect("reference parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_mass_and_positivity() {
        let j = JumpSpec::gaussian(2, 2.0, 0.05);
        let q = JumpMeasureQuadrature::new(&j);
        assert!((q.mass(0) - 2.0).abs() < 1e-12);
        assert_eq!(q.mass(1), 0.0);
        assert!(q.weights.iter().flatten().all(|w| *w >= 0.0));
        assert!(q.eta.iter().all(|e| *e >= 0.0));
        assert!(q.is_null(1) && !q.is_null(0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let base = ModelParams::reference(0.0, 0.0).inputs();
        let mut bad = base.clone();
        bad.rho[0] = 1.5;
        match ModelParams::new(bad) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "model.rho[0]"),
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = base.clone();
        bad.drift[1] = -0.1;
        assert!(ModelParams::new(bad).is_err());
        let mut bad = base.clone();
        bad.theta.pop();
        assert!(ModelParams::new(bad).is_err());
        let mut bad = base;
        bad.jumps.kappa = -1.0;
        assert!(ModelParams::new(bad).is_err());
    }

    #[test]
    fn smooth_jump_integrand_is_accurate() {
        // ∫_0^∞ (e^{-x} - 1 + x) φ(x) dx with e^{x²/2} completing the square
        let q = JumpMeasureQuadrature::new(&JumpSpec::gaussian(1, 1.0, 1.0));
        let quad: f64 = q.weights[0].iter().zip(&q.eta).map(|(w, e)| w * ((-e).exp() - 1.0 + e)).sum();
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let tail = 0.5_f64.exp() * statrs::function::erf::erfc(1.0 / std::f64::consts::SQRT_2) / 2.0;
        let exact = tail - 0.5 + phi0;
        assert!((quad - exact).abs() < 1e-4 * exact, "{quad} vs {exact}");
    }

    #[test]
    fn compensator_closed_form() {
        let j = JumpSpec::gaussian(1, 2.0, 0.1);
        let q = JumpMeasureQuadrature::new(&j);
        let quad: f64 = q.weights[0].iter().zip(&q.eta).map(|(w, e)| w * e).sum();
        // the kink at e = 0 limits Gauss–Hermite accuracy for E[e⁺] itself
        assert!((quad - j.compensator()).abs() < 1e-2 * j.compensator());
    }
}
