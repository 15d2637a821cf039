//! Executes one configured run and packages its trace.

use ctrlopt::algorithms::{reference_gauss_southwell, run, RunOptions, StopReason};
use ctrlopt::flow::{run_flow, FlowController, Termination};
use ctrlopt::objectives::{eval_gradient, eval_value, Objective};
use ctrlopt::trace::TraceRecord;

use crate::config::{ConfigError, Method, RunConfig};
use crate::export::{rows_from, Metadata, Summary, TraceFile};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Core(#[from] ctrlopt::Error),
}

/// A finished run. `degenerate` carries the reason when the controller or
/// iteration broke down part-way; the trace still covers the steps taken.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub trace: TraceFile,
    /// Full core trace, including the terminal state.
    pub records: Vec<TraceRecord>,
    pub degenerate: Option<String>,
}

impl Outcome {
    pub fn summary(&self) -> &Summary {
        &self.trace.metadata.summary
    }
}

/// Runs `cfg` as given: its problem, algorithm, and CLF must be set or defaulted.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.validate_run()?;
    let name = cfg.problem_name()?;
    let algo = cfg.algo_name()?;
    let problem = cfg.build_named_problem(name)?;
    let n = problem.dim();
    let x0 = cfg.start(name)?;
    let options = RunOptions {
        eps_inf: cfg.eps_inf()?,
        max_iter: cfg.max_iter(),
        tie_tolerance: cfg.tie_tol()?,
    };

    let (records, converged, stop, degenerate, clf) = match cfg.method_for(algo, n)? {
        crate::config::Method::Discrete { algorithm, schedule } => {
            let clf = algorithm.clf(options.tie_tolerance)?.kind().name();
            let r = run(&algorithm, &problem, &x0, &schedule, &options)?;
            let degenerate = failure(&r.stop);
            (r.records, r.converged, r.stop.name(), degenerate, clf)
        }
        Method::GaussSouthwellReference { schedule } => {
            let r = reference_gauss_southwell(&problem, &x0, &schedule, &options)?;
            let degenerate = failure(&r.stop);
            (r.records, r.converged, r.stop.name(), degenerate, "max_squares")
        }
        Method::Flow(flow) => {
            let clf = match &flow.controller {
                FlowController::Newton => "smooth_quadratic",
                FlowController::MaxPrinciple { clf, .. } => clf.kind().name(),
            };
            let trace = run_flow(&flow, &problem, &x0)?;
            let degenerate = match &trace.termination {
                Termination::Degenerate(e) => Some(e.to_string()),
                _ => None,
            };
            let converged = trace.termination == Termination::GradTol;
            (trace.records, converged, trace.termination.name(), degenerate, clf)
        }
    };

    let last = records.last().expect("every run records its final state");
    let final_x = &last.x;
    let summary = Summary {
        iterations: records.len() - 1,
        converged,
        stop: stop.to_string(),
        final_objective: eval_value(&problem, final_x)?,
        final_grad_inf: eval_gradient(&problem, final_x)?.amax(),
        final_x: final_x.iter().copied().collect(),
        max_abs_hamiltonian: records.iter().fold(0.0, |m, r| m.max(r.hamiltonian.abs())),
    };
    let mut echo = cfg.clone();
    echo.problem = Some(name.to_string());
    echo.algo = Some(algo.to_string());
    echo.dim = Some(n);
    echo.seed = Some(cfg.seed());
    let metadata = Metadata {
        tool: "ctrlopt".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        problem: name.into(),
        dim: n,
        seed: cfg.seed(),
        algorithm: algo.into(),
        clf: clf.into(),
        columns: Metadata::columns_for(n),
        config: echo,
        summary,
    };
    Ok(Outcome {
        trace: TraceFile {
            metadata,
            records: rows_from(&records),
        },
        records,
        degenerate,
    })
}

fn failure(stop: &StopReason) -> Option<String> {
    match stop {
        StopReason::Failed(e) => Some(e.to_string()),
        _ => None,
    }
}

/// One-line human summary.
pub fn summary_line(s: &Summary) -> String {
    format!(
        "iterations={} final_E={:.10e} final_grad_inf={:.3e} converged={} stop={}",
        s.iterations, s.final_objective, s.final_grad_inf, s.converged, s.stop
    )
}
