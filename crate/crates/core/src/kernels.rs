//! Convolution kernels K(t) = t^{α-1} e^{-βt} / Γ(α) and the integrals of
//! them that the simulation and Riccati schemes consume.
//!
//! All kernel integrals are expressed in the lag variable v = t_k - s, where
//! the singularity of fractional kernels sits at v = 0. For α < 1 the
//! quadrature substitutes u = v^α, which turns K(v) dv into a bounded
//! integrand.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericError, Result};
use crate::grid::TimeGrid;
use crate::quadrature;
use crate::special::gamma;

/// Relative tolerance for every kernel quadrature.
pub const KERNEL_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Constant,
    Fractional,
    Exponential,
    FractionalExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    kind: KernelKind,
    alpha: f64,
    beta: f64,
    #[serde(skip)]
    inv_gamma: f64,
}

impl KernelSpec {
    pub fn constant() -> Self {
        Self::build(KernelKind::Constant, 1.0, 0.0)
    }

    pub fn fractional(alpha: f64) -> Result<Self> {
        Self::new(KernelKind::Fractional, alpha, 0.0)
    }

    pub fn exponential(beta: f64) -> Result<Self> {
        Self::new(KernelKind::Exponential, 1.0, beta)
    }

    pub fn fractional_exponential(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(KernelKind::FractionalExponential, alpha, beta)
    }

    /// Kernel with the most specific kind for (α, β).
    pub fn from_alpha_beta(alpha: f64, beta: f64) -> Result<Self> {
        let kind = match (alpha == 1.0, beta == 0.0) {
            (true, true) => KernelKind::Constant,
            (true, false) => KernelKind::Exponential,
            (false, true) => KernelKind::Fractional,
            (false, false) => KernelKind::FractionalExponential,
        };
        Self::new(kind, alpha, beta)
    }

    pub fn new(kind: KernelKind, alpha: f64, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid("kernel.beta", format!("decay rate {beta} must be >= 0")));
        }
        match kind {
            KernelKind::Constant | KernelKind::Exponential if alpha != 1.0 => {
                return Err(Error::invalid("kernel.alpha", format!("{kind:?} kernels require alpha = 1, got {alpha}")))
            }
            KernelKind::Constant if beta != 0.0 => {
                return Err(Error::invalid("kernel.beta", "constant kernel requires beta = 0"))
            }
            KernelKind::Fractional | KernelKind::FractionalExponential if !(alpha > 0.5 && alpha <= 1.0) => {
                return Err(Error::invalid("kernel.alpha", format!("alpha = {alpha} must lie in (1/2, 1]")))
            }
            KernelKind::Fractional if beta != 0.0 => {
                return Err(Error::invalid("kernel.beta", "fractional kernel requires beta = 0"))
            }
            _ => {}
        }
        Ok(Self::build(kind, alpha, beta))
    }

    fn build(kind: KernelKind, alpha: f64, beta: f64) -> Self {
        KernelSpec { kind, alpha, beta, inv_gamma: if alpha == 1.0 { 1.0 } else { 1.0 / gamma(alpha) } }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when K(0) is infinite.
    pub fn is_singular(&self) -> bool {
        self.alpha < 1.0
    }

    /// K(t) for t > 0.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(NumericError::Domain(format!("kernel evaluated at t = {t} <= 0")).into());
        }
        Ok(self.value(t))
    }

    /// K(t) without the domain check; +∞ at t = 0 for singular kernels.
    pub fn value(&self, t: f64) -> f64 {
        let base = if self.alpha == 1.0 { 1.0 } else { t.powf(self.alpha - 1.0) };
        let decay = if self.beta == 0.0 { 1.0 } else { (-self.beta * t).exp() };
        base * decay * self.inv_gamma
    }

    /// ∫_lo^hi K(v) w(v) dv in the lag variable, 0 ≤ lo ≤ hi.
    pub fn weighted_integral<W: Fn(f64) -> f64>(&self, lo: f64, hi: f64, w: W) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if self.is_singular() {
            let a = self.alpha;
            let inv_a = 1.0 / a;
            let scale = self.inv_gamma * inv_a;
            let beta = self.beta;
            let f = |u: f64| {
                let v = u.powf(inv_a);
                let decay = if beta == 0.0 { 1.0 } else { (-beta * v).exp() };
                decay * w(v)
            };
            let (val, _) = quadrature::integrate(f, lo.powf(a), hi.powf(a), KERNEL_REL_TOL * 1e-2, 0.0);
            val * scale
        } else {
            let (val, _) =
                quadrature::integrate(|v| self.value(v) * w(v), lo, hi, KERNEL_REL_TOL * 1e-2, 0.0);
            val
        }
    }

    /// (∫_lo^hi K(v) dv, ∫_lo^hi v K(v) dv).
    pub fn lag_moments(&self, lo: f64, hi: f64) -> (f64, f64) {
        let a = self.alpha;
        if self.beta == 0.0 {
            let m0 = (hi.powf(a) - lo.powf(a)) * self.inv_gamma / a;
            let m1 = (hi.powf(a + 1.0) - lo.powf(a + 1.0)) * self.inv_gamma / (a + 1.0);
            (m0, m1)
        } else if a == 1.0 {
            let b = self.beta;
            let (el, eh) = ((-b * lo).exp(), (-b * hi).exp());
            let m0 = (el - eh) / b;
            let m1 = (el * (lo + 1.0 / b) - eh * (hi + 1.0 / b)) / b;
            (m0, m1)
        } else {
            (self.weighted_integral(lo, hi, |_| 1.0), self.weighted_integral(lo, hi, |v| v))
        }
    }

    /// ∫_0^t K(v) (t - v) dv, i.e. the time integral of ∫_0^s K.
    pub fn double_integral(&self, t: f64) -> f64 {
        let (m0, m1) = self.lag_moments(0.0, t);
        t * m0 - m1
    }
}

/// ∫_a^b K(t_k - s) ds.
pub fn integrated_kernel(spec: &KernelSpec, a: f64, b: f64, t_k: f64) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= t_k) {
        return Err(NumericError::Domain(format!(
            "integrated_kernel requires 0 <= a < b <= t_k, got a={a}, b={b}, t_k={t_k}"
        ))
        .into());
    }
    Ok(spec.lag_moments(t_k - b, t_k - a).0)
}

/// ∫_a^b K(t_k - s) K(t_j - s) ds for b ≤ min(t_k, t_j).
pub fn covariance_entry(spec: &KernelSpec, t_k: f64, t_j: f64, a: f64, b: f64) -> Result<f64> {
    let near = t_k.min(t_j);
    let far = t_k.max(t_j);
    if !(a < b && b <= near) {
        return Err(NumericError::Domain(format!(
            "covariance_entry requires a < b <= min(t_k, t_j), got a={a}, b={b}, t_k={t_k}, t_j={t_j}"
        ))
        .into());
    }
    let gap = far - near;
    let lo = near - b;
    let hi = near - a;
    let alpha = spec.alpha();
    if gap == 0.0 {
        if spec.beta() == 0.0 {
            if alpha == 1.0 {
                return Ok(hi - lo);
            }
            let p = 2.0 * alpha - 1.0;
            let g = spec.inv_gamma;
            return Ok((hi.powf(p) - lo.powf(p)) * g * g / p);
        }
        if spec.is_singular() {
            // v = u^{1/p} with p = 2α - 1 removes the v^{2α-2} singularity
            let p = 2.0 * alpha - 1.0;
            let g = spec.inv_gamma;
            let beta = spec.beta();
            let f = |u: f64| (-2.0 * beta * u.powf(1.0 / p)).exp();
            let (val, _) =
                quadrature::integrate(f, lo.powf(p), hi.powf(p), KERNEL_REL_TOL * 1e-2, 0.0);
            return Ok(val * g * g / p);
        }
        return Ok(spec.weighted_integral(lo, hi, |v| spec.value(v)));
    }
    Ok(spec.weighted_integral(lo, hi, |v| spec.value(v + gap)))
}

/// Joint covariance of the cell integrals ∫_{t_{ℓ-1}}^{t_ℓ} K(t_k - s) dW_s,
/// k = ℓ..n, with ΔW_{t_ℓ} appended as the last row and column.
pub fn build_step_covariance(spec: &KernelSpec, grid: &TimeGrid, step: usize) -> Result<DMatrix<f64>> {
    let n = grid.steps();
    if step < 1 || step > n {
        return Err(Error::invalid("step", format!("step {step} outside 1..={n}")));
    }
    let m = n - step + 1;
    let a = grid.t(step - 1);
    let b = grid.t(step);
    let mut cov = DMatrix::zeros(m + 1, m + 1);
    for p in 0..m {
        let tp = grid.t(step + p);
        for q in 0..=p {
            let tq = grid.t(step + q);
            let c = covariance_entry(spec, tp, tq, a, b)?;
            cov[(p, q)] = c;
            cov[(q, p)] = c;
        }
        let c = integrated_kernel(spec, a, b, tp)?;
        cov[(p, m)] = c;
        cov[(m, p)] = c;
    }
    cov[(m, m)] = b - a;
    Ok(cov)
}

/// Stationary form of the step covariance used by the simulator: index 0
/// is ΔW over one cell and index p ≥ 1 is ∫_0^Δ K(pΔ - s) dW_s. The block
/// for step ℓ is the leading (n - ℓ + 2) principal submatrix.
pub fn cell_covariance(spec: &KernelSpec, delta: f64, size: usize) -> Result<DMatrix<f64>> {
    let mut cov = DMatrix::zeros(size + 1, size + 1);
    cov[(0, 0)] = delta;
    for p in 1..=size {
        let tp = p as f64 * delta;
        let c = spec.lag_moments(tp - delta, tp).0;
        cov[(0, p)] = c;
        cov[(p, 0)] = c;
        for q in 1..=p {
            let tq = q as f64 * delta;
            let c = covariance_entry(spec, tp, tq, 0.0, delta)?;
            cov[(p, q)] = c;
            cov[(q, p)] = c;
        }
    }
    Ok(cov)
}

/// Lower Cholesky factor of M + εI together with the jitter ε used.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub lower: DMatrix<f64>,
    pub jitter: f64,
}

fn try_cholesky(m: &DMatrix<f64>, jitter: f64, floor: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    // row-major so that the inner products run over contiguous memory
    let mut l = vec![0.0_f64; n * n];
    for j in 0..n {
        let (done, rest) = l.split_at_mut(j * n);
        let row_j = &mut rest[..n];
        for i in 0..j {
            let row_i = &done[i * n..i * n + i];
            let s: f64 = row_i.iter().zip(&row_j[..i]).map(|(a, b)| a * b).sum();
            row_j[i] = (m[(j, i)] - s) / done[i * n + i];
        }
        let d = m[(j, j)] + jitter - row_j[..j].iter().map(|v| v * v).sum::<f64>();
        if !(d > floor) {
            return None;
        }
        row_j[j] = d.sqrt();
    }
    Some(DMatrix::from_row_slice(n, n, &l))
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// Tries ε = 0 and then ε = jitter_start·10^k until the factorization
/// succeeds. A pivot at or below `size · ε_mach · max diag` counts as a
/// failure. Gives up once ε would exceed 1e-4 · max diag.
pub fn stabilized_cholesky(m: &DMatrix<f64>, jitter_start: Option<f64>) -> Result<CholeskyFactor> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("matrix", "stabilized_cholesky needs a square matrix"));
    }
    let max_diag = m.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if m.nrows() == 0 || max_diag == 0.0 {
        return Ok(CholeskyFactor { lower: DMatrix::zeros(m.nrows(), m.ncols()), jitter: 0.0 });
    }
    let start = jitter_start.unwrap_or(1e-12 * max_diag);
    if start < 0.0 {
        return Err(Error::invalid("jitter_start", "must be >= 0"));
    }
    let floor = m.nrows() as f64 * f64::EPSILON * max_diag;
    let limit = 1e-4 * max_diag;
    if let Some(l) = try_cholesky(m, 0.0, floor) {
        return Ok(CholeskyFactor { lower: l, jitter: 0.0 });
    }
    let mut eps = if start > 0.0 { start } else { 1e-12 * max_diag };
    while eps <= limit {
        if let Some(l) = try_cholesky(m, eps, floor) {
            return Ok(CholeskyFactor { lower: l, jitter: eps });
        }
        eps *= 10.0;
    }
    Err(NumericError::NumericalRank { jitter: eps, limit }.into())
}

/// ∫_0^t K_a(u) K_b(t - u) du.
pub fn kernel_convolution(ka: &KernelSpec, kb: &KernelSpec, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if ka.beta() == kb.beta() {
        // Beta-function closed form; the common decay factors out.
        let s = ka.alpha() + kb.alpha();
        let beta_fn = gamma(ka.alpha()) * gamma(kb.alpha()) / gamma(s);
        let decay = if ka.beta() == 0.0 { 1.0 } else { (-ka.beta() * t).exp() };
        return t.powf(s - 1.0) * beta_fn * ka.inv_gamma * kb.inv_gamma * decay;
    }
    let half = 0.5 * t;
    let left = ka.weighted_integral(0.0, half, |u| kb.value(t - u));
    let right = kb.weighted_integral(0.0, half, |v| ka.value(t - v));
    left + right
}

/// Product-integration weights of one kernel on a uniform grid.
///
/// With the lag cells [cΔ, (c+1)Δ], `cell[c] = ∫ K`, `rise[c]` and `fall[c]`
/// are the integrals of K against the increasing and decreasing linear hat
/// halves on that cell. Predictor weights are `cell`; piecewise-linear
/// (trapezoidal product) weights are built from `rise`/`fall`.
#[derive(Debug, Clone)]
pub struct ProductWeights {
    pub cell: Vec<f64>,
    pub rise: Vec<f64>,
    pub fall: Vec<f64>,
}

impl ProductWeights {
    pub fn new(spec: &KernelSpec, grid: &TimeGrid) -> Self {
        let n = grid.steps();
        let d = grid.delta();
        let mut cell = Vec::with_capacity(n);
        let mut rise = Vec::with_capacity(n);
        let mut fall = Vec::with_capacity(n);
        if spec.beta() == 0.0 {
            // closed form in units of Δ to limit cancellation
            let a = spec.alpha();
            let scale0 = d.powf(a) * spec.inv_gamma / a;
            let scale_hat = d.powf(a) / gamma(a + 2.0);
            for c in 0..n {
                let cf = c as f64;
                cell.push(scale0 * ((cf + 1.0).powf(a) - cf.powf(a)));
                // rise: ∫_c^{c+1} x^{a-1}(x - c) dx, fall: ∫_c^{c+1} x^{a-1}(c + 1 - x) dx
                let p1 = (cf + 1.0).powf(a + 1.0) - cf.powf(a + 1.0);
                let p0 = ((cf + 1.0).powf(a) - cf.powf(a)) * (a + 1.0);
                rise.push(scale_hat * (a * p1 - cf * p0));
                fall.push(scale_hat * ((cf + 1.0) * p0 - a * p1));
            }
        } else {
            for c in 0..n {
                let lo = c as f64 * d;
                let hi = lo + d;
                let (m0, m1) = spec.lag_moments(lo, hi);
                cell.push(m0);
                rise.push((m1 - lo * m0) / d);
                fall.push((hi * m0 - m1) / d);
            }
        }
        ProductWeights { cell, rise, fall }
    }

    /// Weight of node j in ∫_0^{t_k} K(t_k - s) f(s) ds for piecewise-linear f.
    #[inline]
    pub fn linear(&self, j: usize, k: usize) -> f64 {
        debug_assert!(j <= k && k >= 1);
        if j == k {
            self.fall[0]
        } else if j == 0 {
            self.rise[k - 1]
        } else {
            self.rise[k - j - 1] + self.fall[k - j]
        }
    }

    /// Weight of node j (< k) in the rectangle (predictor) rule for t_k.
    #[inline]
    pub fn rectangle(&self, j: usize, k: usize) -> f64 {
        self.cell[k - 1 - j]
    }
}

/// D-resolvent of the kernel: R - R⋆(KD) = I, with R(t) = I + ∫₀^t R′.
///
/// `regular` holds R′ - KD, the continuous part of R′.
#[derive(Debug, Clone)]
pub struct ResolventCurve {
    pub grid: TimeGrid,
    pub r: Vec<DMatrix<f64>>,
    pub r_prime: Vec<DMatrix<f64>>,
    pub regular: Vec<DMatrix<f64>>,
}

/// Σ_A C_A · e^{-βt} t^{A-1}/Γ(A): one power of L = KD, grouped by exponent.
type PowerTerms = Vec<(f64, DMatrix<f64>)>;

fn next_power(prev: &PowerTerms, kernels: &[KernelSpec], drift: &DMatrix<f64>) -> PowerTerms {
    let d = kernels.len();
    let mut out: PowerTerms = Vec::new();
    for (a, c) in prev {
        for m in 0..d {
            let key = a + kernels[m].alpha();
            let mut add = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                if c[(i, m)] != 0.0 {
                    for j in 0..d {
                        add[(i, j)] += c[(i, m)] * drift[(m, j)];
                    }
                }
            }
            match out.iter_mut().find(|(b, _)| (b - key).abs() < 1e-12) {
                Some((_, acc)) => *acc += add,
                None => out.push((key, add)),
            }
        }
    }
    out
}

fn power_value(terms: &PowerTerms, beta: f64, t: f64) -> DMatrix<f64> {
    let d = terms[0].1.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (a, c) in terms {
        out += c * (t.powf(a - 1.0) * (-beta * t).exp() / gamma(*a));
    }
    out
}

fn power_integral(terms: &PowerTerms, beta: f64, t: f64) -> DMatrix<f64> {
    let d = terms[0].1.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (a, c) in terms {
        let v = if beta == 0.0 {
            t.powf(*a) / gamma(a + 1.0)
        } else {
            beta.powf(-a) * statrs::function::gamma::gamma_lr(*a, beta * t)
        };
        out += c * v;
    }
    out
}

/// Solve for R and R′ on the grid.
///
/// R′ = L + R′⋆L with L = KD. When all kernels share one decay rate the
/// leading powers L, L⋆L, ... are summed in closed form until the next
/// power is C²; the remainder S obeys S = L^{⋆(P+1)} + S⋆L and is solved
/// by implicit product-trapezoid integration. Otherwise P = 1 and L⋆L is
/// computed pairwise.
pub fn resolvent(kernels: &[KernelSpec], drift: &DMatrix<f64>, grid: &TimeGrid) -> Result<ResolventCurve> {
    let d = kernels.len();
    if drift.nrows() != d || drift.ncols() != d {
        return Err(Error::invalid("D", format!("expected a {d}x{d} matrix")));
    }
    let n = grid.steps();
    let zero = DMatrix::<f64>::zeros(d, d);
    if drift.iter().all(|v| *v == 0.0) {
        let r = vec![DMatrix::identity(d, d); n + 1];
        return Ok(ResolventCurve { grid: *grid, r, r_prime: vec![zero.clone(); n + 1], regular: vec![zero; n + 1] });
    }
    let weights: Vec<ProductWeights> = kernels.iter().map(|k| ProductWeights::new(k, grid)).collect();
    let beta = kernels[0].beta();
    let common = kernels.iter().all(|k| k.beta() == beta);
    let alpha_min = kernels.iter().map(|k| k.alpha()).fold(1.0, f64::min);

    // powers[p-1] = L^{⋆p}
    let mut powers: Vec<PowerTerms> = Vec::new();
    if common {
        let first: PowerTerms = (0..d)
            .map(|m| {
                let mut c = DMatrix::<f64>::zeros(d, d);
                for j in 0..d {
                    c[(m, j)] = drift[(m, j)];
                }
                (kernels[m].alpha(), c)
            })
            .collect();
        powers.push(first);
        let p_max = ((3.0 / alpha_min).ceil() as usize).saturating_sub(1).max(1);
        while powers.len() < p_max + 1 {
            let next = next_power(powers.last().expect("non-empty"), kernels, drift);
            powers.push(next);
        }
    }
    let forcing_at = |t: f64| -> DMatrix<f64> {
        if common {
            power_value(powers.last().expect("non-empty"), beta, t)
        } else {
            let mut out = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for m in 0..d {
                    if drift[(i, m)] == 0.0 {
                        continue;
                    }
                    let c = kernel_convolution(&kernels[i], &kernels[m], t) * drift[(i, m)];
                    for j in 0..d {
                        out[(i, j)] += c * drift[(m, j)];
                    }
                }
            }
            out
        }
    };

    // implicit system matrix (I - W0 D)
    let mut sys = DMatrix::<f64>::identity(d, d);
    for m in 0..d {
        for j in 0..d {
            sys[(m, j)] -= weights[m].fall[0] * drift[(m, j)];
        }
    }
    let sys_inv = sys.try_inverse().ok_or(NumericError::SingularResolvent { node: 1 })?;
    let mut rem: Vec<DMatrix<f64>> = Vec::with_capacity(n + 1);
    rem.push(forcing_at(0.0).map(|v| if v.is_finite() { v } else { 0.0 }));
    for k in 1..=n {
        let mut acc = DMatrix::<f64>::zeros(d, d);
        for (jn, s) in rem.iter().enumerate() {
            for m in 0..d {
                let w = weights[m].linear(jn, k);
                for i in 0..d {
                    acc[(i, m)] += s[(i, m)] * w;
                }
            }
        }
        let rhs = forcing_at(grid.t(k)) + acc * drift;
        let s_k = rhs * &sys_inv;
        if s_k.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::SingularResolvent { node: k }.into());
        }
        rem.push(s_k);
    }

    let mut r = Vec::with_capacity(n + 1);
    let mut r_prime = Vec::with_capacity(n + 1);
    let mut regular = Vec::with_capacity(n + 1);
    let mut int_rem = DMatrix::<f64>::zeros(d, d);
    let half = 0.5 * grid.delta();
    for k in 0..=n {
        let t = grid.t(k);
        if k > 0 {
            int_rem += (&rem[k - 1] + &rem[k]) * half;
        }
        // singular part L and its integral, exact
        let mut l = DMatrix::<f64>::zeros(d, d);
        let mut il = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            let kv = if k == 0 { 0.0 } else { kernels[i].value(t) };
            let ik = if k == 0 { 0.0 } else { kernels[i].lag_moments(0.0, t).0 };
            for j in 0..d {
                l[(i, j)] = kv * drift[(i, j)];
                il[(i, j)] = ik * drift[(i, j)];
            }
        }
        let mut reg = rem[k].clone();
        let mut rk = DMatrix::<f64>::identity(d, d) + il + &int_rem;
        if common && k > 0 {
            for terms in &powers[1..powers.len() - 1] {
                reg += power_value(terms, beta, t);
                rk += power_integral(terms, beta, t);
            }
        }
        if k == 0 {
            // R′(0) is infinite for singular kernels; report its regular part only
            for i in 0..d {
                if !kernels[i].is_singular() {
                    for j in 0..d {
                        l[(i, j)] = drift[(i, j)];
                    }
                }
            }
        }
        r.push(rk);
        r_prime.push(&l + &reg);
        regular.push(reg);
    }
    Ok(ResolventCurve { grid: *grid, r, r_prime, regular })
}
