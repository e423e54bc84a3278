use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use volterra_merton::laplace::{laplace_check, riccati_measure};
use volterra_merton::merton::{expected_variance, indifference_price, strategy_curve, value_for};
use volterra_merton::riccati::solve_utility;
use volterra_merton::sim::{simulate_v, simulate_wealth_additive, simulate_wealth_multiplicative, write_paths_csv};
use volterra_merton::{RiccatiSolution, TimeGrid};

use crate::config::{ExperimentConfig, UtilityChoice};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Solve the utility Riccati equation; writes riccati.csv.
    SolveRiccati,
    /// Simulate variance paths (and optimal wealth when a utility is set); writes paths.csv.
    Simulate,
    /// Optimal strategy multipliers m(t) with α*_i = m_i √V^i; writes strategy.csv.
    OptimalStrategy,
    /// Closed-form value function; writes value.json.
    Value,
    /// Indifference price of the claim ∫ζᵀV ds; writes indifference.json.
    Indifference,
    /// Laplace transform formula against Monte Carlo; writes laplace.json.
    LaplaceCheck,
    /// E[V_t] on the grid; writes expected_variance.csv.
    ExpectedVariance,
    /// Riccati refinement differences; writes convergence.csv.
    Convergence,
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    let out = match cmd {
        Command::SolveRiccati => solve_riccati(cfg)?,
        Command::Simulate => simulate(cfg)?,
        Command::OptimalStrategy => optimal_strategy(cfg)?,
        Command::Value => value(cfg)?,
        Command::Indifference => indifference(cfg)?,
        Command::LaplaceCheck => laplace(cfg)?,
        Command::ExpectedVariance => expected(cfg)?,
        Command::Convergence => convergence(cfg)?,
    };
    Ok(vec![out])
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(",")).map_err(io(path))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

fn write_json(path: &Path, cfg: &ExperimentConfig, body: Value) -> Result<()> {
    let mut obj = match body {
        Value::Object(m) => m,
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    obj.insert("config_hash".into(), Value::String(cfg.hash()));
    let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json serializes");
    let mut w = create(path)?;
    writeln!(w, "{text}").map_err(io(path))?;
    w.flush().map_err(io(path))
}

fn columns(prefix: &str, d: usize, first: &str) -> Vec<String> {
    std::iter::once(first.to_string()).chain((1..=d).map(|i| format!("{prefix}_{i}"))).collect()
}

fn riccati_for(cfg: &ExperimentConfig, grid: &TimeGrid) -> Result<RiccatiSolution> {
    let params = cfg.params()?;
    let u = cfg.utility_problem()?;
    if u.kind == volterra_merton::UtilityKind::Log {
        return Err(CliError::invalid("utility.kind", "log utility has no Riccati equation"));
    }
    let sol = solve_utility(&params, &u, grid)?;
    if let Some(node) = sol.blow_up {
        return Err(volterra_merton::NumericError::BlowUp { node, t: grid.t(node) }.into());
    }
    Ok(sol)
}

fn solve_riccati(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let grid = cfg.grid()?;
    let sol = riccati_for(cfg, &grid)?;
    let path = cfg.output.dir.join("riccati.csv");
    let rows = (0..=grid.steps()).map(|k| std::iter::once(grid.t(k)).chain(sol.psi[k].iter().copied()).collect());
    write_table(&path, &columns("psi", cfg.model.d, "t"), rows)?;
    Ok(path)
}

fn simulate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let bundle = simulate_v(&params, &grid, cfg.mc.paths, cfg.mc.seed)?;
    let wealth = match cfg.utility.kind {
        None => None,
        Some(kind) => {
            let u = cfg.utility_problem()?;
            let sol = match kind {
                UtilityChoice::Log => None,
                _ => Some(riccati_for(cfg, &grid)?),
            };
            let strat = strategy_curve(&params, &u, sol.as_ref(), &grid)?;
            Some(match kind {
                UtilityChoice::Exponential => simulate_wealth_additive(&params, &bundle, &strat, cfg.utility.x0)?,
                _ => simulate_wealth_multiplicative(&params, &bundle, &strat, cfg.utility.x0)?,
            })
        }
    };
    let path = cfg.output.dir.join("paths.csv");
    let mut w = create(&path)?;
    write_paths_csv(&mut w, &bundle, wealth.as_deref()).map_err(io(&path))?;
    w.flush().map_err(io(&path))?;
    Ok(path)
}

fn optimal_strategy(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let u = cfg.utility_problem()?;
    let sol = match u.kind {
        volterra_merton::UtilityKind::Log => None,
        _ => Some(riccati_for(cfg, &grid)?),
    };
    let strat = strategy_curve(&params, &u, sol.as_ref(), &grid)?;
    let path = cfg.output.dir.join("strategy.csv");
    let rows = strat.multipliers.iter().enumerate().map(|(k, m)| std::iter::once(grid.t(k)).chain(m.iter().copied()).collect());
    write_table(&path, &columns("m", cfg.model.d, "t"), rows)?;
    Ok(path)
}

fn value(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let u = cfg.utility_problem()?;
    let (report, _) = value_for(&params, &u, cfg.utility.x0, &grid)?;
    let mut body = serde_json::to_value(&report).expect("report serializes");
    body["x0"] = json!(cfg.utility.x0);
    let path = cfg.output.dir.join("value.json");
    write_json(&path, cfg, body)?;
    Ok(path)
}

fn indifference(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let u = cfg.utility_problem()?;
    let p = indifference_price(&params, &u, cfg.utility.x0, &grid)?;
    let mut body = serde_json::to_value(&p).expect("price serializes");
    body["gamma"] = json!(u.gamma);
    body["zeta"] = json!(u.zeta);
    body["x0"] = json!(cfg.utility.x0);
    let path = cfg.output.dir.join("indifference.json");
    write_json(&path, cfg, body)?;
    Ok(path)
}

fn laplace(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let m = cfg.test_measure();
    let r = laplace_check(&params, &m, &grid, cfg.mc.paths, cfg.mc.seed)?;
    let mut body = serde_json::to_value(&r).expect("check serializes");
    body["c"] = json!(m.density);
    body["u"] = json!(m.atom);
    body["paths"] = json!(cfg.mc.paths);
    body["n"] = json!(grid.steps());
    body["seed"] = json!(cfg.mc.seed);
    let path = cfg.output.dir.join("laplace.json");
    write_json(&path, cfg, body)?;
    Ok(path)
}

fn expected(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let ev = expected_variance(&params, &grid)?;
    let path = cfg.output.dir.join("expected_variance.csv");
    let rows = ev.iter().enumerate().map(|(k, e)| std::iter::once(grid.t(k)).chain(e.iter().copied()).collect());
    write_table(&path, &columns("EV", cfg.model.d, "t"), rows)?;
    Ok(path)
}

/// Rows (n, max_j |ψ_n(t_j) - ψ_2n(t_j)|) for n = N/4, N/2, N.
///
/// Uses the utility Riccati equation when one applies, the Laplace
/// measure equation otherwise.
fn convergence(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = cfg.params()?;
    let base = cfg.grid()?;
    let top = base.steps();
    if top < 4 || top % 4 != 0 {
        return Err(CliError::invalid("grid.n", format!("convergence needs a multiple of 4, got {top}")));
    }
    let use_utility = matches!(cfg.utility.kind, Some(UtilityChoice::Exponential | UtilityChoice::Power));
    let solve = |n: usize| -> Result<RiccatiSolution> {
        let grid = base.with_steps(n)?;
        if use_utility {
            riccati_for(cfg, &grid)
        } else {
            let sol = riccati_measure(&params, &cfg.test_measure(), &grid)?;
            if let Some(node) = sol.blow_up {
                return Err(volterra_merton::NumericError::BlowUp { node, t: grid.t(node) }.into());
            }
            Ok(sol)
        }
    };
    let mut rows = Vec::new();
    for n in [top / 4, top / 2, top] {
        let coarse = solve(n)?;
        let fine = solve(2 * n)?;
        let err = (0..=n)
            .flat_map(|j| coarse.psi[j].iter().zip(&fine.psi[2 * j]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        rows.push(vec![n as f64, err]);
    }
    let path = cfg.output.dir.join("convergence.csv");
    write_table(&path, &["n".to_string(), "error".to_string()], rows.into_iter())?;
    Ok(path)
}
