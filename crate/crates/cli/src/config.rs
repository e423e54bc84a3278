//! Experiment configuration: TOML in, validated library objects out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use volterra_merton::laplace::TestMeasure;
use volterra_merton::{JumpSpec, KernelSpec, ModelInputs, ModelParams, TimeGrid, UtilityProblem};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum UtilityChoice {
    Exponential,
    Power,
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub jumps: JumpsSection,
    pub grid: GridSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub utility: UtilitySection,
    #[serde(default)]
    pub laplace: LaplaceSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta_kernel: Option<Vec<f64>>,
    pub v0: Vec<f64>,
    pub mu0: Vec<f64>,
    /// Row-major d×d.
    #[serde(rename = "D")]
    pub drift: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma_v: Vec<f64>,
    #[serde(default)]
    pub varsigma: Option<Vec<f64>>,
    pub r: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpsSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub intensity: f64,
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_paths() -> usize {
    10_000
}

impl Default for McSection {
    fn default() -> Self {
        McSection { paths: default_paths(), seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    #[serde(default)]
    pub kind: Option<UtilityChoice>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
    /// Initial wealth.
    #[serde(default = "default_x0")]
    pub x0: f64,
}

fn default_x0() -> f64 {
    1.0
}

impl Default for UtilitySection {
    fn default() -> Self {
        UtilitySection { kind: None, gamma: None, zeta: None, x0: default_x0() }
    }
}

/// Test measure c·ds + u·δ_T; c defaults to 0.5 and u to 0 for every asset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceSection {
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub u: Option<Vec<f64>>,
}

/// Tabular artifacts are CSV; summaries are always JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), format: OutputFormat::default() }
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub n: Option<usize>,
    pub utility: Option<UtilityChoice>,
    pub gamma: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Read, apply overrides and validate.
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::parse(&text, path)?;
        cfg.apply(ov);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(dir) = &ov.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = ov.seed {
            self.mc.seed = seed;
        }
        if let Some(paths) = ov.paths {
            self.mc.paths = paths;
        }
        if let Some(n) = ov.n {
            self.grid.n = n;
        }
        if let Some(kind) = ov.utility {
            self.utility.kind = Some(kind);
            if kind != UtilityChoice::Exponential {
                self.utility.zeta = None;
            }
        }
        if let Some(gamma) = ov.gamma {
            self.utility.gamma = Some(gamma);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.d;
        if d == 0 {
            return Err(CliError::invalid("model.d", "must be at least 1"));
        }
        let m = &self.model;
        let mut lens: Vec<(&str, usize, usize)> = vec![
            ("model.alpha", m.alpha.len(), d),
            ("model.v0", m.v0.len(), d),
            ("model.mu0", m.mu0.len(), d),
            ("model.D", m.drift.len(), d * d),
            ("model.rho", m.rho.len(), d),
            ("model.theta", m.theta.len(), d),
            ("model.sigma_v", m.sigma_v.len(), d),
        ];
        let optional = [
            ("model.beta_kernel", m.beta_kernel.as_ref()),
            ("model.varsigma", m.varsigma.as_ref()),
            ("utility.zeta", self.utility.zeta.as_ref()),
            ("laplace.c", self.laplace.c.as_ref()),
            ("laplace.u", self.laplace.u.as_ref()),
        ];
        for (name, v) in optional {
            if let Some(v) = v {
                lens.push((name, v.len(), d));
            }
        }
        for (name, got, want) in lens {
            if got != want {
                return Err(CliError::invalid(name, format!("has length {got}, expected {want}")));
            }
        }
        if !self.jumps.enabled && (self.jumps.intensity != 0.0 || self.jumps.kappa != 0.0) {
            eprintln!("note: jumps.enabled = false, ignoring intensity and kappa");
        }
        if !self.utility.x0.is_finite() {
            return Err(CliError::invalid("utility.x0", "must be finite"));
        }
        self.params()?;
        self.grid()?;
        if self.utility.kind.is_some() {
            self.utility_problem()?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let d = m.d;
        let beta = m.beta_kernel.clone().unwrap_or_else(|| vec![0.0; d]);
        let kernels = (0..d)
            .map(|i| {
                KernelSpec::from_alpha_beta(m.alpha[i], beta[i]).map_err(|e| match e {
                    volterra_merton::Error::Invalid { field, reason } => {
                        let key = if field.ends_with("beta") { "model.beta_kernel" } else { "model.alpha" };
                        CliError::invalid(format!("{key}[{i}]"), reason)
                    }
                    other => other.into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let jumps = if self.jumps.enabled {
            JumpSpec::gaussian(d, self.jumps.intensity, self.jumps.kappa)
        } else {
            JumpSpec::none(d)
        };
        Ok(ModelParams::new(ModelInputs {
            kernels,
            v0: m.v0.clone(),
            mu0: m.mu0.clone(),
            drift: m.drift.clone(),
            rho: m.rho.clone(),
            theta: m.theta.clone(),
            sigma_v: m.sigma_v.clone(),
            varsigma: m.varsigma.clone(),
            rate: m.r,
            jumps,
        })?)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.n).map_err(|e| match e {
            volterra_merton::Error::Invalid { reason, .. } => {
                let key = if self.grid.n == 0 { "grid.n" } else { "grid.T" };
                CliError::invalid(key, reason)
            }
            other => other.into(),
        })
    }

    pub fn utility_kind(&self) -> Result<UtilityChoice> {
        self.utility.kind.ok_or_else(|| CliError::invalid("utility.kind", "is required (set it in [utility] or pass --utility)"))
    }

    pub fn utility_problem(&self) -> Result<UtilityProblem> {
        let d = self.model.d;
        let gamma = || self.utility.gamma.ok_or_else(|| CliError::invalid("utility.gamma", "is required for this utility"));
        let u = match self.utility_kind()? {
            UtilityChoice::Exponential => {
                UtilityProblem::exponential(gamma()?, self.utility.zeta.clone().unwrap_or_else(|| vec![0.0; d]))?
            }
            UtilityChoice::Power => {
                if self.utility.zeta.as_ref().is_some_and(|z| z.iter().any(|x| *x != 0.0)) {
                    return Err(CliError::invalid("utility.zeta", "is only used with exponential utility"));
                }
                UtilityProblem::power(gamma()?, d)?
            }
            UtilityChoice::Log => UtilityProblem::log(d),
        };
        u.validate(&self.params()?)?;
        Ok(u)
    }

    pub fn test_measure(&self) -> TestMeasure {
        let d = self.model.d;
        TestMeasure {
            density: self.laplace.c.clone().unwrap_or_else(|| vec![0.5; d]),
            atom: self.laplace.u.clone().unwrap_or_else(|| vec![0.0; d]),
        }
    }

    /// SHA-256 of the resolved configuration serialized as compact JSON,
    /// output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
