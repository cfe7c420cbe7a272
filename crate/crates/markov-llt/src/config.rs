//! TOML experiment configuration.
//!
//! Every knob has a default and unknown keys are rejected. The SHA-256 of
//! the raw file bytes is carried into every output.

use std::fmt;
use std::path::{Path, PathBuf};

use markov_llt_core::kernel::{PropagatorConfig, PropagatorMethod};
use markov_llt_core::linalg::RMat;
use markov_llt_core::simulate::{FastSlowSystem, PolyMatrix};
use markov_llt_core::{GeneratorModel, Observable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;
use crate::verify::{Kernel, Named, TestBank, Thresholds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CheckModel,
    ScanSpectrum,
    Sigma,
    Nagaev,
    Eigprod,
    Llt,
    LltRho,
    Fastslow,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CheckModel => "check-model",
            ExperimentKind::ScanSpectrum => "scan-spectrum",
            ExperimentKind::Sigma => "sigma",
            ExperimentKind::Nagaev => "nagaev",
            ExperimentKind::Eigprod => "eigprod",
            ExperimentKind::Llt => "llt",
            ExperimentKind::LltRho => "llt-rho",
            ExperimentKind::Fastslow => "fastslow",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used by `describe` when no experiment is named on the command line.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub model: ModelSpec,
    #[serde(default)]
    pub observable: Option<ObservableSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub bank: BankSpec,
    #[serde(default)]
    pub fastslow: Option<FastSlowSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("mllt-out")
}

/// A state given by index or by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Label(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub from: StateRef,
    pub to: StateRef,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub states: Vec<String>,
    pub rates: Vec<RateSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    /// `coefficients[j][x]` lists the ascending α-coefficients of `b(α, x)_j`.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    #[serde(default = "yes")]
    pub center: bool,
    #[serde(default = "default_degree_cap")]
    pub degree_cap: usize,
}

fn yes() -> bool {
    true
}

fn default_degree_cap() -> usize {
    markov_llt_core::observable::DEFAULT_DEGREE_CAP
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Magnus4,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub steps: usize,
    pub method: Method,
    pub refine_check: bool,
    pub fd_step: f64,
    pub quadrature_points: usize,
    pub scan_alphas: usize,
    pub scan_tolerance: f64,
    pub certificate_time: f64,
    pub mixing_target: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            steps: 256,
            method: Method::Magnus4,
            refine_check: false,
            fd_step: 1e-3,
            quadrature_points: 17,
            scan_alphas: 33,
            scan_tolerance: 1e-6,
            certificate_time: 1.0,
            mixing_target: 0.25,
        }
    }
}

impl Numerics {
    pub fn propagator(&self) -> PropagatorConfig {
        PropagatorConfig {
            method: match self.method {
                Method::Magnus4 => PropagatorMethod::Magnus4,
                Method::Rk4 => PropagatorMethod::Rk4,
            },
            steps: self.steps,
            refine_check: self.refine_check,
        }
    }
}

/// A point of `ℝ^d`; a bare number stands for a one-dimensional point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    fn resolve(&self, d: usize, what: &str) -> Result<Vec<f64>, RunError> {
        let v = match self {
            Point::Scalar(x) => {
                let mut v = vec![0.0; d];
                if d > 0 {
                    v[0] = *x;
                }
                if d != 1 {
                    return Err(RunError::config(format!("{what}: bare number given but d = {d}; use a list")));
                }
                v
            }
            Point::Vector(v) => v.clone(),
        };
        if v.len() != d {
            return Err(RunError::config(format!("{what}: point {v:?} has {} coordinates, expected {d}", v.len())));
        }
        Ok(v)
    }
}

fn resolve_points(points: &[Point], d: usize, what: &str) -> Result<Vec<Vec<f64>>, RunError> {
    points.iter().map(|p| p.resolve(d, what)).collect()
}

/// Grids, horizons and replica counts. Unset entries take per-experiment
/// defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub reps: Option<u64>,
    pub horizons: Option<Vec<f64>>,
    pub t_grid: Option<Vec<Point>>,
    pub tau_grid: Option<Vec<Point>>,
    pub rho: Option<Vec<f64>>,
    /// α used by the Monte Carlo Hessian in `sigma`.
    pub mc_alpha: Option<f64>,
}

/// Fully resolved run parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub reps: u64,
    pub horizons: Vec<f64>,
    pub t_grid: Vec<Vec<f64>>,
    pub tau_grid: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub mc_alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Keyword(String),
    Explicit { name: String, values: Vec<f64> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankSpec {
    /// `"one"`, `"indicator:<state>"`, `"-indicator:<state>"` or `{ name, values }`.
    pub f: Option<Vec<VectorSpec>>,
    pub g: Option<Vec<Kernel>>,
    /// `"nu"`, `"uniform"`, `"delta:<state>"` or `{ name, values }`.
    pub mu: Option<Vec<VectorSpec>>,
    /// Displacements in units of `√T`.
    pub u_scales: Option<Vec<Point>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastSlowSpec {
    /// `a[r][c]` lists the ascending coefficients of `A(s)[r, c]` in macroscopic time.
    pub a: Vec<Vec<Vec<f64>>>,
    /// `v[j][x]` lists the coefficients of `v(α, x)_j` in `α = s / t_final`.
    pub v: Vec<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> Vec<f64> {
    vec![1.0 / 200.0]
}

/// Parsed file plus its hash.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
    pub path: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and parses a config, applying `MLLT_THREADS` and `MLLT_OUT_DIR`.
pub fn load(path: &Path) -> Result<LoadedConfig, RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| RunError::config(format!("{} is not UTF-8: {e}", path.display())))?;
    let mut config = parse(text)?;
    if let Ok(v) = std::env::var("MLLT_THREADS") {
        config.threads = v
            .trim()
            .parse()
            .map_err(|_| RunError::config(format!("MLLT_THREADS must be a non-negative integer, got {v:?}")))?;
    }
    if let Ok(v) = std::env::var("MLLT_OUT_DIR") {
        config.out_dir = PathBuf::from(v);
    }
    Ok(LoadedConfig {
        config,
        sha256: sha256_hex(&bytes),
        path: path.to_path_buf(),
    })
}

pub fn parse(text: &str) -> Result<ExperimentConfig, RunError> {
    toml::from_str(text).map_err(|e| RunError::config(format!("config: {e}")))
}

impl ExperimentConfig {
    pub fn build_model(&self) -> Result<GeneratorModel, RunError> {
        let spec = &self.model;
        let n = spec.states.len();
        if n == 0 {
            return Err(RunError::config("model::validate_generator: at least one state is required"));
        }
        let index = |r: &StateRef| -> Result<usize, RunError> {
            match r {
                StateRef::Index(i) if *i < n => Ok(*i),
                StateRef::Index(i) => Err(RunError::config(format!("model: state index {i} outside 0..{n}"))),
                StateRef::Label(l) => spec
                    .states
                    .iter()
                    .position(|s| s == l)
                    .ok_or_else(|| RunError::config(format!("model: unknown state label {l:?}"))),
            }
        };
        let mut g = RMat::zeros(n, n);
        for r in &spec.rates {
            let (from, to) = (index(&r.from)?, index(&r.to)?);
            if from == to {
                return Err(RunError::config(format!("model: self-rate on state {from} is not allowed")));
            }
            g[(from, to)] += r.rate;
            g[(from, from)] -= r.rate;
        }
        GeneratorModel::with_labels(g, spec.states.clone())
            .map_err(|e| RunError::config(format!("model::validate_generator: {e}")))
    }

    /// The observable, centered under `ν` unless disabled.
    pub fn build_observable(&self, model: &GeneratorModel) -> Result<Observable, RunError> {
        let spec = self
            .observable
            .as_ref()
            .ok_or_else(|| RunError::config("config: this experiment needs an [observable] section"))?;
        let d = spec.coefficients.len();
        let b = Observable::with_degree_cap(d, model.n(), &spec.coefficients, spec.degree_cap)
            .map_err(|e| RunError::config(format!("observable: {e}")))?;
        if spec.center {
            b.center(model.nu()).map_err(|e| RunError::config(format!("observable::center: {e}")))
        } else {
            Ok(b)
        }
    }

    pub fn build_fastslow(&self, model: &GeneratorModel) -> Result<(FastSlowSystem, Vec<f64>, Vec<f64>), RunError> {
        let spec = self
            .fastslow
            .as_ref()
            .ok_or_else(|| RunError::config("config: fastslow needs a [fastslow] section"))?;
        let a = PolyMatrix::new(&spec.a).map_err(|e| RunError::config(format!("fastslow.a: {e}")))?;
        let d = a.dim();
        let v = Observable::new(spec.v.len(), model.n(), &spec.v).map_err(|e| RunError::config(format!("fastslow.v: {e}")))?;
        let system = FastSlowSystem::new(model.clone(), a, v, spec.t_final).map_err(|e| RunError::config(format!("fastslow: {e}")))?;
        let y0 = spec.y0.clone().unwrap_or_else(|| vec![0.0; d]);
        if y0.len() != d {
            return Err(RunError::config(format!("fastslow.y0 has {} entries, expected {d}", y0.len())));
        }
        if spec.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(RunError::config("fastslow.eps entries must be > 0"));
        }
        Ok((system, y0, spec.eps.clone()))
    }

    pub fn resolve(&self, kind: ExperimentKind, d: usize) -> Result<Resolved, RunError> {
        let run = &self.run;
        let (reps, horizons): (u64, Vec<f64>) = match kind {
            ExperimentKind::Nagaev => (100_000, vec![5.5, 10.25, 20.0]),
            ExperimentKind::Eigprod => (0, vec![25.0, 100.0, 400.0]),
            ExperimentKind::Sigma => (100_000, vec![50.0, 100.0, 200.0]),
            ExperimentKind::Llt | ExperimentKind::LltRho => (1_000_000, vec![50.0, 200.0]),
            ExperimentKind::Fastslow => (1_000_000, vec![]),
            ExperimentKind::CheckModel | ExperimentKind::ScanSpectrum => (0, vec![]),
        };
        let reps = run.reps.unwrap_or(reps);
        let horizons = run.horizons.clone().unwrap_or(horizons);
        if horizons.iter().any(|&h| !(h >= 1.0) || !h.is_finite()) {
            return Err(RunError::config("run.horizons entries must be finite and ≥ 1"));
        }
        let default_t: Vec<Point> = match kind {
            ExperimentKind::ScanSpectrum => [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].iter().map(|&x| Point::Scalar(x)).collect(),
            _ => (0..13).map(|i| Point::Scalar(-3.0 + 0.5 * i as f64)).collect(),
        };
        let axis_points = |xs: &[f64]| -> Vec<Vec<f64>> {
            xs.iter()
                .map(|&x| {
                    let mut v = vec![0.0; d];
                    v[0] = x;
                    v
                })
                .collect()
        };
        let t_grid = match &run.t_grid {
            Some(p) => resolve_points(p, d, "run.t_grid")?,
            None if d == 1 => resolve_points(&default_t, d, "run.t_grid")?,
            None => axis_points(&[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]),
        };
        let tau_grid = match &run.tau_grid {
            Some(p) => resolve_points(p, d, "run.tau_grid")?,
            None => axis_points(&[0.0, 0.5, 1.0]),
        };
        let rho = run.rho.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5]);
        if rho.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(RunError::config("run.rho entries must lie in [0, 1)"));
        }
        let mc_alpha = run.mc_alpha.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&mc_alpha) {
            return Err(RunError::config("run.mc_alpha must lie in [0, 1]"));
        }
        Ok(Resolved {
            reps,
            horizons,
            t_grid,
            tau_grid,
            rho,
            mc_alpha,
        })
    }

    pub fn build_bank(&self, model: &GeneratorModel, d: usize) -> Result<TestBank, RunError> {
        let mut bank = TestBank::standard(model, d);
        let n = model.n();
        let state = |s: &str| -> Result<usize, RunError> {
            if let Ok(i) = s.parse::<usize>() {
                if i < n {
                    return Ok(i);
                }
            }
            model
                .labels()
                .iter()
                .position(|l| l == s)
                .ok_or_else(|| RunError::config(format!("bank: unknown state {s:?}")))
        };
        let unit = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        let explicit = |name: &str, values: &[f64]| -> Result<Named, RunError> {
            if values.len() != n {
                return Err(RunError::config(format!("bank: {name:?} has {} entries, expected {n}", values.len())));
            }
            Ok(Named::new(name, values.to_vec()))
        };
        if let Some(fs) = &self.bank.f {
            bank.f = fs
                .iter()
                .map(|s| match s {
                    VectorSpec::Explicit { name, values } => explicit(name, values),
                    VectorSpec::Keyword(k) if k == "one" => Ok(Named::new("one", vec![1.0; n])),
                    VectorSpec::Keyword(k) => {
                        if let Some(rest) = k.strip_prefix("-indicator:") {
                            Ok(Named::new(k.clone(), unit(state(rest)?).iter().map(|v| -v).collect()))
                        } else if let Some(rest) = k.strip_prefix("indicator:") {
                            Ok(Named::new(k.clone(), unit(state(rest)?)))
                        } else {
                            Err(RunError::config(format!("bank.f: unknown test function {k:?}")))
                        }
                    }
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(gs) = &self.bank.g {
            if gs.iter().any(|g| match g {
                Kernel::Triangle { width } | Kernel::Bump { width } => !(*width > 0.0),
            }) {
                return Err(RunError::config("bank.g: kernel widths must be > 0"));
            }
            bank.g = gs.clone();
        }
        if let Some(ms) = &self.bank.mu {
            bank.mu = ms
                .iter()
                .map(|s| {
                    let named = match s {
                        VectorSpec::Explicit { name, values } => explicit(name, values)?,
                        VectorSpec::Keyword(k) if k == "nu" => Named::new("nu", model.nu().to_vec()),
                        VectorSpec::Keyword(k) if k == "uniform" => Named::new("uniform", vec![1.0 / n as f64; n]),
                        VectorSpec::Keyword(k) => match k.strip_prefix("delta:") {
                            Some(rest) => Named::new(k.clone(), unit(state(rest)?)),
                            None => return Err(RunError::config(format!("bank.mu: unknown initial law {k:?}"))),
                        },
                    };
                    let total: f64 = named.values.iter().sum();
                    if named.values.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-12 {
                        return Err(RunError::config(format!("bank.mu: {:?} is not a probability vector", named.name)));
                    }
                    Ok(named)
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(us) = &self.bank.u_scales {
            bank.u_scales = resolve_points(us, d, "bank.u_scales")?;
        }
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
        seed = 7
        [model]
        states = ["up", "down"]
        rates = [{ from = "up", to = "down", rate = 1.0 }, { from = 1, to = 0, rate = 1.0 }]
        [observable]
        coefficients = [[[1.0], [-1.0]]]
    "#;

    #[test]
    fn reference_config_builds() {
        let cfg = parse(REFERENCE).unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.nu(), &[0.5, 0.5]);
        let b = cfg.build_observable(&model).unwrap();
        assert!(b.is_centered());
        let r = cfg.resolve(ExperimentKind::Nagaev, 1).unwrap();
        assert_eq!(r.t_grid.len(), 13);
        assert_eq!(r.horizons, vec![5.5, 10.25, 20.0]);
        assert_eq!(cfg.numerics.steps, 256);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = REFERENCE.replace("seed = 7", "seed = 7\nsede = 8");
        assert!(parse(&bad).is_err());
        let bad = REFERENCE.replace("[observable]", "[observable]\ncentre = true");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn negative_rate_cites_validation() {
        let bad = REFERENCE.replace("rate = 1.0 }, {", "rate = -1.0 }, {");
        let err = parse(&bad).unwrap().build_model().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("validate_generator"));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
