//! K-integrated Euler–Maruyama simulation of the variance process with
//! jumps, and wealth paths driven by it.
//!
//! Each path owns two ChaCha streams selected by its index, so path i does
//! not depend on how many paths are drawn: one for the jump events and one
//! for the Gaussians. Runs with and without jumps therefore share their
//! Brownian draws. Per step the Gaussian stream yields, for every asset, the
//! block of the step followed by one normal for B^⊥.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{cell_covariance, stabilized_cholesky, KernelSpec, ProductWeights};
use crate::params::{JumpSpec, ModelParams};

/// Jump arrivals of one path on (0, T].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpEvents {
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
    /// η(e_m), shared by every asset.
    pub sizes: Vec<f64>,
}

impl JumpEvents {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Draw Poisson arrivals with exponential(β) gaps and N(0,1) marks.
pub fn sample_jumps<R: Rng + ?Sized>(jumps: &JumpSpec, grid: &TimeGrid, rng: &mut R) -> JumpEvents {
    let mut ev = JumpEvents::default();
    if jumps.intensity <= 0.0 {
        return ev;
    }
    let gap = Exp::new(jumps.intensity).expect("positive intensity");
    let mut t = 0.0;
    loop {
        t += rng.sample(gap);
        if t > grid.horizon() {
            break;
        }
        let e: f64 = rng.sample(StandardNormal);
        ev.times.push(t);
        ev.marks.push(e);
        ev.sizes.push(jumps.eta(e));
    }
    ev
}

/// Gaussian RNG of one path.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Jump RNG of one path.
pub fn jump_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id | 1 << 63);
    rng
}

/// Low-rank factor of the stationary step covariance of one asset.
#[derive(Debug, Clone)]
struct StepFactor {
    /// Row-major (n+1) × (rank+1). Row p holds the drift weight of the cell
    /// that reaches p nodes ahead followed by row p of the factor; row 0
    /// generates ΔW.
    table: Vec<f64>,
    rank: usize,
    jitter: f64,
}

impl StepFactor {
    fn new(spec: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        let n = grid.steps();
        let cov = cell_covariance(spec, grid.delta(), n)?;
        let max_diag = cov.diagonal().iter().fold(0.0_f64, |a, v| a.max(*v));
        let chol = stabilized_cholesky(&cov, None)?;
        let l = &chol.lower;
        // drop trailing columns whose energy is negligible in every row
        let tol = (1e-10 * max_diag).max(10.0 * chol.jitter);
        let size = n + 1;
        let mut rank = size;
        let mut tail = vec![0.0_f64; size];
        while rank > 1 {
            let c = rank - 1;
            let mut worst: f64 = 0.0;
            for (p, t) in tail.iter_mut().enumerate().skip(c) {
                *t += l[(p, c)] * l[(p, c)];
                worst = worst.max(*t);
            }
            if worst > tol {
                break;
            }
            rank -= 1;
        }
        let cell = ProductWeights::new(spec, grid).cell;
        let w = rank + 1;
        let mut table = vec![0.0; size * w];
        for p in 0..size {
            table[p * w] = if p == 0 { 0.0 } else { cell[p - 1] };
            for c in 0..rank.min(p + 1) {
                table[p * w + 1 + c] = l[(p, c)];
            }
        }
        Ok(StepFactor { table, rank, jitter: chol.jitter })
    }

    fn rank(&self) -> usize {
        self.rank
    }
}

/// One simulated path handed to a visitor. Arrays are node-major with
/// stride d: `v[k*d + i]` is V^i at t_k, `dw[(ℓ-1)*d + i]` the increment
/// over (t_{ℓ-1}, t_ℓ].
#[derive(Debug)]
pub struct PathView<'a> {
    pub path_id: usize,
    /// max(V̄, 0) at every node.
    pub v: &'a [f64],
    /// Untruncated scheme values V̄, same layout as `v`.
    pub raw: &'a [f64],
    pub dw: &'a [f64],
    pub db: &'a [f64],
    /// Σ_{T_m ≤ t_k} K_i(t_k - T_m) η(e_m) at every node.
    pub jump_part: &'a [f64],
    pub jumps: &'a JumpEvents,
}

/// Precomputed factors for simulating one model on one grid.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    grid: TimeGrid,
    factors: Vec<StepFactor>,
}

impl Simulator {
    pub fn new(params: &ModelParams, grid: &TimeGrid) -> Result<Self> {
        if params.jumps.state_intensity.iter().any(|s| *s != 0.0) {
            return Err(Error::invalid(
                "jumps.state_intensity",
                "state-dependent jump measures are not supported by the simulator",
            ));
        }
        let factors = params.kernels.iter().map(|k| StepFactor::new(k, grid)).collect::<Result<Vec<_>>>()?;
        Ok(Simulator { params: params.clone(), grid: *grid, factors })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Rank kept for each asset's step factor and the jitter it needed.
    pub fn factor_ranks(&self) -> Vec<(usize, f64)> {
        self.factors.iter().map(|f| (f.rank(), f.jitter)).collect()
    }

    /// Simulate paths `first..first+count` and hand each to `visit`.
    pub fn for_each_path<F>(&self, seed: u64, first: usize, count: usize, mut visit: F)
    where
        F: FnMut(&PathView<'_>),
    {
        let p = &self.params;
        let d = p.dim();
        let n = self.grid.steps();
        let delta = self.grid.delta();
        let sqrt_delta = delta.sqrt();
        let comp = p.jumps.compensator();
        let max_rank = self.factors.iter().map(|f| f.rank()).max().unwrap_or(1);

        // acc[i][k]: everything already scheduled for V^i(t_k) except V0 and jumps
        let mut acc = vec![vec![0.0; n + 1]; d];
        let mut raw = vec![0.0; (n + 1) * d];
        let mut v = vec![0.0; (n + 1) * d];
        let mut jump_part = vec![0.0; (n + 1) * d];
        let mut dw = vec![0.0; n * d];
        let mut db = vec![0.0; n * d];
        let mut z = vec![0.0; max_rank + 1];
        let mut drift = vec![0.0; d];
        let mut vol = vec![0.0; d];

        for path_id in first..first + count {
            let jumps = sample_jumps(&p.jumps, &self.grid, &mut jump_rng(seed, path_id as u64));
            let mut rng = path_rng(seed, path_id as u64);
            acc.iter_mut().for_each(|a| a.iter_mut().for_each(|x| *x = 0.0));
            jump_part.iter_mut().for_each(|x| *x = 0.0);
            if !jumps.is_empty() {
                for k in 1..=n {
                    let tk = self.grid.t(k);
                    for (tm, eta) in jumps.times.iter().zip(&jumps.sizes) {
                        let lag = tk - tm;
                        if lag > 0.0 && *eta != 0.0 {
                            for i in 0..d {
                                jump_part[k * d + i] += p.kernels[i].value(lag) * eta;
                            }
                        }
                    }
                }
            }
            for i in 0..d {
                raw[i] = p.v0[i];
                v[i] = p.v0[i].max(0.0);
            }
            for l in 1..=n {
                let prev = &raw[(l - 1) * d..l * d];
                for i in 0..d {
                    let mut dv = 0.0;
                    for j in 0..d {
                        dv += p.drift[(i, j)] * prev[j];
                    }
                    drift[i] = p.mu0[i] + dv - comp;
                    vol[i] = p.sigma_v[i] * p.varsigma[i] * prev[i].max(0.0).sqrt();
                }
                let len = n - l + 1;
                for i in 0..d {
                    let f = &self.factors[i];
                    let w = f.rank + 1;
                    // coefficients of [drift, z_0..z_{r-1}] against one table row
                    z[0] = drift[i];
                    for zc in z[1..w].iter_mut() {
                        *zc = rng.sample(StandardNormal);
                    }
                    let dw_l = f.table[1] * z[1];
                    for zc in z[1..w].iter_mut() {
                        *zc *= vol[i];
                    }
                    let coef = &z[..w];
                    let rows = f.table[w..(len + 1) * w].chunks_exact(w);
                    for (a, row) in acc[i][l..].iter_mut().zip(rows) {
                        *a += row.iter().zip(coef).map(|(x, c)| x * c).sum::<f64>();
                    }
                    let w = dw_l;
                    let zb: f64 = rng.sample(StandardNormal);
                    let rho = p.rho[i];
                    dw[(l - 1) * d + i] = w;
                    db[(l - 1) * d + i] = rho * w + (1.0 - rho * rho).max(0.0).sqrt() * sqrt_delta * zb;
                }
                for i in 0..d {
                    let x = p.v0[i] + acc[i][l] + jump_part[l * d + i];
                    raw[l * d + i] = x;
                    v[l * d + i] = x.max(0.0);
                }
            }
            visit(&PathView { path_id, v: &v, raw: &raw, dw: &dw, db: &db, jump_part: &jump_part, jumps: &jumps });
        }
    }
}

/// Simulated ensemble held in memory.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub dim: usize,
    pub seed: u64,
    pub n_paths: usize,
    /// [path][(n+1)*d], truncated at 0.
    pub v: Vec<Vec<f64>>,
    /// [path][n*d]
    pub dw: Vec<Vec<f64>>,
    /// [path][n*d]
    pub db: Vec<Vec<f64>>,
    pub jump_part: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvents>,
}

impl PathBundle {
    /// V^i(t_k) on path p.
    pub fn value(&self, path: usize, k: usize, i: usize) -> f64 {
        self.v[path][k * self.dim + i]
    }
}

/// Simulate `n_paths` variance paths and keep them all.
pub fn simulate_v(params: &ModelParams, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathBundle> {
    if n_paths == 0 {
        return Err(Error::invalid("mc.paths", "path count must be at least 1"));
    }
    let sim = Simulator::new(params, grid)?;
    let mut b = PathBundle {
        grid: *grid,
        dim: params.dim(),
        seed,
        n_paths,
        v: Vec::with_capacity(n_paths),
        dw: Vec::with_capacity(n_paths),
        db: Vec::with_capacity(n_paths),
        jump_part: Vec::with_capacity(n_paths),
        jumps: Vec::with_capacity(n_paths),
    };
    sim.for_each_path(seed, 0, n_paths, |pv| {
        b.v.push(pv.v.to_vec());
        b.dw.push(pv.dw.to_vec());
        b.db.push(pv.db.to_vec());
        b.jump_part.push(pv.jump_part.to_vec());
        b.jumps.push(pv.jumps.clone());
    });
    Ok(b)
}

/// Expected value of the discrete scheme, E[V̄_{t_k}], by its linear recursion.
pub fn scheme_mean(params: &ModelParams, grid: &TimeGrid) -> Vec<Vec<f64>> {
    let d = params.dim();
    let n = grid.steps();
    let cells: Vec<Vec<f64>> = params.kernels.iter().map(|k| ProductWeights::new(k, grid).cell).collect();
    let mut m = vec![params.v0.iter().copied().collect::<Vec<f64>>()];
    for k in 1..=n {
        let mut row = vec![0.0; d];
        for (i, r) in row.iter_mut().enumerate() {
            let mut s = params.v0[i];
            for l in 1..=k {
                let prev = &m[l - 1];
                let dv: f64 = (0..d).map(|j| params.drift[(i, j)] * prev[j]).sum();
                s += cells[i][k - l] * (params.mu0[i] + dv);
            }
            *r = s;
        }
        m.push(row);
    }
    m
}

/// Investment rule evaluated at node k (left end of step k+1) from V(t_k).
pub trait Strategy {
    fn eval(&self, k: usize, v: &[f64], out: &mut [f64]);
}

impl<F: Fn(usize, &[f64], &mut [f64])> Strategy for F {
    fn eval(&self, k: usize, v: &[f64], out: &mut [f64]) {
        self(k, v, out)
    }
}

/// α_i(t_k) = m_i(t_k)·√V^i(t_k) for a deterministic multiplier curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierStrategy {
    /// multipliers[k][i]
    pub multipliers: Vec<Vec<f64>>,
}

impl Strategy for MultiplierStrategy {
    fn eval(&self, k: usize, v: &[f64], out: &mut [f64]) {
        for ((o, m), x) in out.iter_mut().zip(&self.multipliers[k]).zip(v) {
            *o = m * x.max(0.0).sqrt();
        }
    }
}

fn check_path(params: &ModelParams, grid: &TimeGrid, v: &[f64], db: &[f64]) -> Result<()> {
    let d = params.dim();
    let n = grid.steps();
    if v.len() != (n + 1) * d || db.len() != n * d {
        return Err(Error::invalid("bundle", "path arrays do not match the grid and dimension"));
    }
    Ok(())
}

/// Additive wealth X_{t_k} = e^{r t_k}(x0 + Σ_ℓ e^{-r t_{ℓ-1}}(α·ΔB + α·λ Δ))
/// with α and λ = θ√V frozen at the left end of each step.
pub fn wealth_additive<S: Strategy + ?Sized>(
    params: &ModelParams,
    grid: &TimeGrid,
    v: &[f64],
    db: &[f64],
    strategy: &S,
    x0: f64,
) -> Result<Vec<f64>> {
    check_path(params, grid, v, db)?;
    let d = params.dim();
    let n = grid.steps();
    let delta = grid.delta();
    let mut a = vec![0.0; d];
    let mut out = Vec::with_capacity(n + 1);
    out.push(x0);
    let mut disc = x0;
    for l in 1..=n {
        let vk = &v[(l - 1) * d..l * d];
        strategy.eval(l - 1, vk, &mut a);
        let mut inc = 0.0;
        for i in 0..d {
            let lam = params.theta[i] * vk[i].max(0.0).sqrt();
            inc += a[i] * (db[(l - 1) * d + i] + lam * delta);
        }
        disc += (-params.rate_integral(grid.t(l - 1))).exp() * inc;
        out.push(params.rate_integral(grid.t(l)).exp() * disc);
    }
    Ok(out)
}

/// log X_{t_k} = log x0 + Σ_ℓ (r + α·λ - |α|²/2)Δ + α·ΔB.
pub fn log_wealth_multiplicative<S: Strategy + ?Sized>(
    params: &ModelParams,
    grid: &TimeGrid,
    v: &[f64],
    db: &[f64],
    strategy: &S,
    x0: f64,
) -> Result<Vec<f64>> {
    if !(x0 > 0.0) {
        return Err(Error::invalid("x0", format!("multiplicative wealth needs x0 > 0, got {x0}")));
    }
    check_path(params, grid, v, db)?;
    let d = params.dim();
    let n = grid.steps();
    let delta = grid.delta();
    let mut a = vec![0.0; d];
    let mut out = Vec::with_capacity(n + 1);
    let mut lx = x0.ln();
    out.push(lx);
    for l in 1..=n {
        let vk = &v[(l - 1) * d..l * d];
        strategy.eval(l - 1, vk, &mut a);
        let mut drift = params.rate;
        let mut noise = 0.0;
        for i in 0..d {
            let lam = params.theta[i] * vk[i].max(0.0).sqrt();
            drift += a[i] * lam - 0.5 * a[i] * a[i];
            noise += a[i] * db[(l - 1) * d + i];
        }
        lx += drift * delta + noise;
        out.push(lx);
    }
    Ok(out)
}

/// Additive wealth on every path of a bundle.
pub fn simulate_wealth_additive<S: Strategy + ?Sized>(
    params: &ModelParams,
    bundle: &PathBundle,
    strategy: &S,
    x0: f64,
) -> Result<Vec<Vec<f64>>> {
    (0..bundle.n_paths)
        .map(|p| wealth_additive(params, &bundle.grid, &bundle.v[p], &bundle.db[p], strategy, x0))
        .collect()
}

/// Multiplicative wealth on every path of a bundle.
pub fn simulate_wealth_multiplicative<S: Strategy + ?Sized>(
    params: &ModelParams,
    bundle: &PathBundle,
    strategy: &S,
    x0: f64,
) -> Result<Vec<Vec<f64>>> {
    (0..bundle.n_paths)
        .map(|p| {
            log_wealth_multiplicative(params, &bundle.grid, &bundle.v[p], &bundle.db[p], strategy, x0)
                .map(|lx| lx.into_iter().map(f64::exp).collect())
        })
        .collect()
}

/// Write `path_id,k,t,V_1..V_d[,X]` rows.
pub fn write_paths_csv<W: Write>(out: &mut W, bundle: &PathBundle, wealth: Option<&[Vec<f64>]>) -> std::io::Result<()> {
    let d = bundle.dim;
    let mut header = String::from("path_id,k,t");
    for i in 1..=d {
        header.push_str(&format!(",V_{i}"));
    }
    if wealth.is_some() {
        header.push_str(",X");
    }
    writeln!(out, "{header}")?;
    for p in 0..bundle.n_paths {
        for k in 0..=bundle.grid.steps() {
            write!(out, "{p},{k},{}", bundle.grid.t(k))?;
            for i in 0..d {
                write!(out, ",{}", bundle.value(p, k, i))?;
            }
            if let Some(w) = wealth {
                write!(out, ",{}", w[p][k])?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
