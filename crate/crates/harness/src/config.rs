//! Run configuration: a flat TOML file plus command-line flags, flags winning.

use std::path::{Path, PathBuf};

use clap::Args;
use ctrlopt::algorithms::{Algorithm, StepSchedule};
use ctrlopt::clf::{BlockStructure, LyapunovFunction, DEFAULT_TIE_TOLERANCE};
use ctrlopt::controller::{ControlSet, MetricKind};
use ctrlopt::flow::{DeltaRule, FlowConfig, FlowController, Integrator};
use ctrlopt::objectives::{make_benchmark, BenchmarkProblem, ProblemParams, CATALOG};
use ctrlopt::Vector;
use serde::{Deserialize, Serialize};

pub const ALGORITHMS: [&str; 8] = [
    "newton",
    "gradient",
    "cd",
    "block_cd",
    "sign_cd",
    "gauss_southwell_ref",
    "flow_newton",
    "flow_max_principle",
];

pub const CLF_KINDS: [&str; 4] = ["smooth_quadratic", "max_squares", "block_max", "inf_norm"];

pub const DEFAULT_SEED: u64 = 42;

/// First trial step of backtracking. Generous, so the accepted step is near
/// the exact one even on flat problems, where a short step's decrease can
/// drop below the rounding of `E`.
pub const DEFAULT_BACKTRACKING_ALPHA: f64 = 10.0;

/// Directory used for outputs when no explicit path is given.
pub const OUT_DIR_ENV: &str = "CTRLOPT_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Every setting of a run or sweep. Optional fields fall back to defaults
/// that depend on the problem or algorithm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    /// Diagonal of `diagonal_quadratic`.
    pub diag: Option<Vec<f64>>,
    /// Ridge weight of `logistic_l2`.
    pub l2: Option<f64>,
    /// Sample count of `logistic_l2`.
    pub samples: Option<usize>,
    pub x0: Option<Vec<f64>>,

    pub algo: Option<String>,
    pub clf: Option<String>,
    /// Block sizes for `block_cd` and the block-max CLF.
    pub blocks: Option<Vec<usize>>,
    /// Per-block multiples of the identity metric.
    pub block_scales: Option<Vec<f64>>,

    /// `hessian` or `identity`.
    pub metric: Option<String>,
    /// `Δ` for the `fixed` rule, the factor `c` in `Δ = c‖λ‖²` for `costate`.
    pub delta: Option<f64>,
    /// `costate` or `fixed`.
    pub delta_rule: Option<String>,
    pub ridge: Option<f64>,

    /// `constant`, `backtracking`, `diminishing`, or `exact`.
    pub schedule: Option<String>,
    pub alpha: Option<f64>,
    pub shrink: Option<f64>,
    pub sufficient_decrease: Option<f64>,

    pub eps_inf: Option<f64>,
    pub max_iter: Option<usize>,
    pub sweep_max_iter: Option<usize>,
    pub tie_tol: Option<f64>,
    pub nu0: Option<f64>,

    /// `rk4` or `euler`.
    pub integrator: Option<String>,
    pub h: Option<f64>,
    pub tf: Option<f64>,

    pub output: Option<PathBuf>,
    /// `csv` or `json`.
    pub format: Option<String>,
}

/// Command-line form of [`RunConfig`].
#[derive(Clone, Debug, Default, Args)]
pub struct ConfigArgs {
    /// Flat TOML file with any of the keys below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub diag: Option<Vec<f64>>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long)]
    pub clf: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub blocks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub block_scales: Option<Vec<f64>>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub delta_rule: Option<String>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub shrink: Option<f64>,
    #[arg(long)]
    pub sufficient_decrease: Option<f64>,
    #[arg(long)]
    pub eps_inf: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub sweep_max_iter: Option<usize>,
    #[arg(long)]
    pub tie_tol: Option<f64>,
    #[arg(long)]
    pub nu0: Option<f64>,
    #[arg(long)]
    pub integrator: Option<String>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = Some(v); })*
    };
}

impl ConfigArgs {
    /// Loads the file named by `--config` (if any) and applies the flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        overlay!(cfg, self;
            problem, dim, seed, diag, l2, samples, x0, algo, clf, blocks, block_scales,
            metric, delta, delta_rule, ridge, schedule, alpha, shrink, sufficient_decrease,
            eps_inf, max_iter, sweep_max_iter, tie_tol, nu0, integrator, h, tf, output, format,
        );
        Ok(cfg)
    }
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn one_of<'a>(name: &str, value: &'a str, allowed: &[&str]) -> Result<&'a str, ConfigError> {
    if allowed.contains(&value) {
        Ok(value)
    } else {
        Err(invalid(format!(
            "unknown {name} '{value}' (expected one of: {})",
            allowed.join(", ")
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// What to execute: a discrete algorithm or a continuous flow.
#[derive(Clone, Debug)]
pub enum Method {
    Discrete {
        algorithm: Algorithm,
        schedule: StepSchedule,
    },
    GaussSouthwellReference {
        schedule: StepSchedule,
    },
    Flow(FlowConfig),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn problem_name(&self) -> Result<&str, ConfigError> {
        let name = self.problem.as_deref().ok_or_else(|| invalid("no problem given"))?;
        one_of("problem", name, &CATALOG)
    }

    pub fn algo_name(&self) -> Result<&str, ConfigError> {
        one_of("algorithm", self.algo.as_deref().unwrap_or("cd"), &ALGORITHMS)
    }

    pub fn clf_name(&self) -> Result<&str, ConfigError> {
        one_of("clf", self.clf.as_deref().unwrap_or("max_squares"), &CLF_KINDS)
    }

    pub fn format(&self) -> Result<Format, ConfigError> {
        match self.format.as_deref().unwrap_or("csv") {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }

    /// Dimension from `dim`, else from `x0`, else from `diag`, else 8.
    pub fn dimension(&self) -> Result<usize, ConfigError> {
        let n = self
            .dim
            .or(self.x0.as_ref().map(Vec::len))
            .or(self.diag.as_ref().map(Vec::len))
            .unwrap_or(8);
        if n == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        for (name, len) in [
            ("x0", self.x0.as_ref().map(Vec::len)),
            ("diag", self.diag.as_ref().map(Vec::len)),
        ] {
            if let Some(len) = len {
                if len != n {
                    return Err(invalid(format!("{name} has {len} entries, dimension is {n}")));
                }
            }
        }
        Ok(n)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn params_for(&self, name: &str) -> Result<ProblemParams, ConfigError> {
        let mut params = ProblemParams::with_dim(self.dimension()?, self.seed());
        if name == "diagonal_quadratic" {
            params.diag = self.diag.clone();
        }
        if let Some(l2) = self.l2 {
            params.l2 = l2;
        }
        params.samples = self.samples;
        Ok(params)
    }

    pub fn build_problem(&self) -> Result<BenchmarkProblem, ConfigError> {
        let name = self.problem_name()?;
        self.build_named_problem(name)
    }

    pub fn build_named_problem(&self, name: &str) -> Result<BenchmarkProblem, ConfigError> {
        make_benchmark(name, &self.params_for(name)?).map_err(|e| invalid(e.to_string()))
    }

    /// Starting point: `x0` if given, else the catalog default.
    pub fn start(&self, name: &str) -> Result<Vector, ConfigError> {
        let n = self.dimension()?;
        Ok(match &self.x0 {
            Some(x0) => Vector::from_column_slice(x0),
            None => ctrlopt::objectives::default_start(name, n),
        })
    }

    pub fn eps_inf(&self) -> Result<f64, ConfigError> {
        positive("eps_inf", self.eps_inf.unwrap_or(ctrlopt::algorithms::DEFAULT_EPS_INF))
    }

    pub fn tie_tol(&self) -> Result<f64, ConfigError> {
        let tau = self.tie_tol.unwrap_or(DEFAULT_TIE_TOLERANCE);
        if (0.0..1.0).contains(&tau) {
            Ok(tau)
        } else {
            Err(invalid(format!("tie_tol must lie in [0, 1), got {tau}")))
        }
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter.unwrap_or(ctrlopt::algorithms::DEFAULT_MAX_ITER)
    }

    pub fn sweep_max_iter(&self) -> usize {
        self.sweep_max_iter.unwrap_or(10_000)
    }

    pub fn block_structure(&self, n: usize) -> Result<BlockStructure, ConfigError> {
        let sizes = match &self.blocks {
            Some(sizes) => sizes.clone(),
            None => {
                let mut sizes = vec![2; n / 2];
                if n % 2 == 1 {
                    sizes.push(1);
                }
                sizes
            }
        };
        if sizes.iter().sum::<usize>() != n {
            return Err(invalid(format!("block sizes {sizes:?} do not sum to {n}")));
        }
        let built = match &self.block_scales {
            Some(scales) => BlockStructure::scaled_identity(sizes, scales),
            None => BlockStructure::identity(sizes),
        };
        built.map_err(|e| invalid(format!("blocks: {e}")))
    }

    pub fn lyapunov(&self, kind: &str, n: usize) -> Result<LyapunovFunction, ConfigError> {
        let clf = match one_of("clf", kind, &CLF_KINDS)? {
            "smooth_quadratic" => LyapunovFunction::smooth_quadratic(),
            "max_squares" => LyapunovFunction::max_squares(),
            "block_max" => LyapunovFunction::block_max(self.block_structure(n)?),
            _ => LyapunovFunction::inf_norm(),
        };
        clf.with_tie_tolerance(self.tie_tol()?)
            .map_err(|e| invalid(e.to_string()))
    }

    /// Default step: the initial trial step for backtracking, else a
    /// per-algorithm constant.
    fn default_alpha(algo: &str, schedule: &str) -> f64 {
        match (algo, schedule) {
            (_, "backtracking") => DEFAULT_BACKTRACKING_ALPHA,
            ("newton", _) => 1.0,
            ("sign_cd", _) => 1e-2,
            _ => 0.1,
        }
    }

    pub fn schedule_for(&self, algo: &str) -> Result<StepSchedule, ConfigError> {
        let kind = self.schedule.as_deref().unwrap_or("constant");
        let alpha = positive("alpha", self.alpha.unwrap_or(Self::default_alpha(algo, kind)))?;
        let schedule = match kind {
            "constant" => StepSchedule::Constant { alpha },
            "diminishing" => StepSchedule::Diminishing { alpha0: alpha },
            "exact" => StepSchedule::QuadraticLineSearch,
            "backtracking" => StepSchedule::Backtracking {
                alpha0: alpha,
                shrink: self.shrink.unwrap_or(ctrlopt::algorithms::DEFAULT_SHRINK),
                sufficient_decrease: self
                    .sufficient_decrease
                    .unwrap_or(ctrlopt::algorithms::DEFAULT_SUFFICIENT_DECREASE),
            },
            other => {
                return Err(invalid(format!(
                    "unknown schedule '{other}' (expected constant, backtracking, diminishing, or exact)"
                )))
            }
        };
        schedule.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(schedule)
    }

    pub fn control_set(&self) -> Result<ControlSet, ConfigError> {
        let metric = match self.metric.as_deref().unwrap_or("hessian") {
            "hessian" => MetricKind::Hessian,
            "identity" => MetricKind::Identity,
            other => return Err(invalid(format!("unknown metric '{other}' (expected hessian or identity)"))),
        };
        let delta = positive("delta", self.delta.unwrap_or(1.0))?;
        ControlSet::new(metric, delta)
            .and_then(|s| s.with_ridge(self.ridge.unwrap_or(0.0)))
            .map_err(|e| invalid(e.to_string()))
    }

    /// Flow settings; `controller` is `None` for the Newton flow or a CLF name.
    pub fn flow_config(&self, clf: Option<&str>, n: usize) -> Result<FlowConfig, ConfigError> {
        let mut cfg = match clf {
            None => FlowConfig::newton(),
            Some(kind) => {
                let set = self.control_set()?;
                let delta_rule = match self.delta_rule.as_deref().unwrap_or("costate") {
                    "costate" => DeltaRule::CostateScaled(set.delta()),
                    "fixed" => DeltaRule::Fixed,
                    other => return Err(invalid(format!("unknown delta_rule '{other}' (expected costate or fixed)"))),
                };
                FlowConfig {
                    controller: FlowController::MaxPrinciple {
                        clf: self.lyapunov(kind, n)?,
                        set,
                        delta_rule,
                    },
                    ..FlowConfig::newton()
                }
            }
        };
        let h = positive("h", self.h.unwrap_or(cfg.integrator.step()))?;
        cfg.integrator = match self.integrator.as_deref().unwrap_or("rk4") {
            "rk4" => Integrator::Rk4 { h },
            "euler" => Integrator::Euler { h },
            other => return Err(invalid(format!("unknown integrator '{other}' (expected rk4 or euler)"))),
        };
        if let Some(tf) = self.tf {
            cfg.tf = tf;
        }
        cfg.stop_grad_tol = self.eps_inf()?;
        if let Some(nu0) = self.nu0 {
            cfg.nu0 = nu0;
        }
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn method_for(&self, algo: &str, n: usize) -> Result<Method, ConfigError> {
        let algorithm = match one_of("algorithm", algo, &ALGORITHMS)? {
            "newton" => Algorithm::Newton,
            "gradient" => Algorithm::Gradient,
            "cd" => Algorithm::CoordinateDescent,
            "block_cd" => Algorithm::BlockCoordinateDescent(self.block_structure(n)?),
            "sign_cd" => Algorithm::SignCoordinateDescent,
            "gauss_southwell_ref" => {
                return Ok(Method::GaussSouthwellReference {
                    schedule: self.schedule_for(algo)?,
                })
            }
            "flow_newton" => return Ok(Method::Flow(self.flow_config(None, n)?)),
            _ => return Ok(Method::Flow(self.flow_config(Some(self.clf_name()?), n)?)),
        };
        Ok(Method::Discrete {
            algorithm,
            schedule: self.schedule_for(algo)?,
        })
    }

    /// Checks every name and range a single run depends on.
    pub fn validate_run(&self) -> Result<(), ConfigError> {
        let name = self.problem_name()?;
        self.format()?;
        self.eps_inf()?;
        let problem = self.build_named_problem(name)?;
        let n = ctrlopt::objectives::Objective::dim(&problem);
        if let Some(x0) = &self.x0 {
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(invalid("x0 must be finite"));
            }
        }
        if let Some(nu0) = self.nu0 {
            positive("nu0", nu0)?;
        }
        self.method_for(self.algo_name()?, n)?;
        Ok(())
    }
}

/// Output directory from [`OUT_DIR_ENV`], defaulting to the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let dir = std::env::temp_dir().join(format!("ctrlopt-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "problem = \"rosenbrock\"\nalpha = 0.5\nseed = 3\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            alpha: Some(0.25),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.problem.as_deref(), Some("rosenbrock"));
        assert_eq!(cfg.alpha, Some(0.25));
        assert_eq!(cfg.seed(), 3);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("problme = \"x\"").is_err());
    }

    #[test]
    fn names_must_resolve() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate_run().is_err());
        cfg.problem = Some("diagonal_quadratic".into());
        cfg.validate_run().unwrap();
        cfg.algo = Some("bogus".into());
        assert!(cfg.validate_run().is_err());
        cfg.algo = Some("flow_max_principle".into());
        cfg.clf = Some("l1".into());
        assert!(cfg.validate_run().is_err());
    }

    #[test]
    fn dimension_conflicts_are_rejected() {
        let cfg = RunConfig {
            problem: Some("diagonal_quadratic".into()),
            dim: Some(3),
            x0: Some(vec![1.0, 1.0]),
            ..Default::default()
        };
        assert!(cfg.validate_run().is_err());
    }

    #[test]
    fn default_blocks_pair_coordinates() {
        let b = RunConfig::default().block_structure(5).unwrap();
        assert_eq!(b.sizes(), &[2, 2, 1]);
    }
}
