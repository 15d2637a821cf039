//! Euler-discretized iterations `x_{k+1} = x_k + α_k p_k`.
//!
//! Each search direction `p_k` is the control of a continuous primitive with
//! the costate eliminated through `λ_x = -∇E(x)` (`ν₀ = 1`):
//!
//! | algorithm  | CLF                | direction              |
//! |------------|--------------------|------------------------|
//! | `newton`   | smooth quadratic   | `-[∇²E]⁻¹ ∇E`          |
//! | `gradient` | smooth quadratic   | `-∇E`                  |
//! | `cd`       | max of squares     | `-q∘∇E`                |
//! | `block_cd` | block max          | `-q∘(Q∇E)`             |
//! | `sign_cd`  | infinity norm      | `-q∘sign(∇E)`          |
//!
//! [`reference_gauss_southwell`] is a separately written classical
//! coordinate descent used to cross-check `cd`.

use alloc::vec::Vec;

use crate::clf::{BlockStructure, LyapunovFunction, DEFAULT_TIE_TOLERANCE};
use crate::controller::{max_principle_control, ControlSet, MetricKind};
use crate::costate::{costate_from_gradient, hamiltonian, CostateState};
use crate::linalg::{inf_norm, is_finite};
use crate::objectives::{eval_gradient, eval_hessian, eval_value, Objective};
use crate::trace::TraceRecord;
use crate::{Error, Result, Vector};

pub const DEFAULT_EPS_INF: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
pub const DEFAULT_SHRINK: f64 = 0.5;
pub const DEFAULT_SUFFICIENT_DECREASE: f64 = 1e-4;
/// Backtracking gives up after this many shrinks.
pub const MAX_BACKTRACKS: usize = 80;

#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Newton,
    Gradient,
    CoordinateDescent,
    BlockCoordinateDescent(BlockStructure),
    SignCoordinateDescent,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Newton => "newton",
            Algorithm::Gradient => "gradient",
            Algorithm::CoordinateDescent => "cd",
            Algorithm::BlockCoordinateDescent(_) => "block_cd",
            Algorithm::SignCoordinateDescent => "sign_cd",
        }
    }

    /// The CLF whose dissipation generates this algorithm.
    pub fn clf(&self, tie_tolerance: f64) -> Result<LyapunovFunction> {
        let clf = match self {
            Algorithm::Newton | Algorithm::Gradient => LyapunovFunction::smooth_quadratic(),
            Algorithm::CoordinateDescent => LyapunovFunction::max_squares(),
            Algorithm::BlockCoordinateDescent(b) => LyapunovFunction::block_max(b.clone()),
            Algorithm::SignCoordinateDescent => LyapunovFunction::inf_norm(),
        };
        clf.with_tie_tolerance(tie_tolerance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    Constant {
        alpha: f64,
    },
    /// Armijo backtracking: shrink `α` by `shrink` until
    /// `E(x + αp) ≤ E(x) + c α ∇E·p` and `E` strictly decreases.
    Backtracking {
        alpha0: f64,
        shrink: f64,
        sufficient_decrease: f64,
    },
    /// `α_k = α₀ / (k + 1)`.
    Diminishing {
        alpha0: f64,
    },
    /// `α = -∇E·p / pᵀ∇²E p`, the exact minimizer along `p` on quadratics.
    QuadraticLineSearch,
}

impl StepSchedule {
    pub fn backtracking(alpha0: f64) -> Self {
        StepSchedule::Backtracking {
            alpha0,
            shrink: DEFAULT_SHRINK,
            sufficient_decrease: DEFAULT_SUFFICIENT_DECREASE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Constant { .. } => "constant",
            StepSchedule::Backtracking { .. } => "backtracking",
            StepSchedule::Diminishing { .. } => "diminishing",
            StepSchedule::QuadraticLineSearch => "quadratic_line_search",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |a: f64| a > 0.0 && a.is_finite();
        let ok = match *self {
            StepSchedule::Constant { alpha } => positive(alpha),
            StepSchedule::Diminishing { alpha0 } => positive(alpha0),
            StepSchedule::Backtracking {
                alpha0,
                shrink,
                sufficient_decrease,
            } => {
                positive(alpha0)
                    && shrink > 0.0
                    && shrink < 1.0
                    && sufficient_decrease > 0.0
                    && sufficient_decrease < 1.0
            }
            StepSchedule::QuadraticLineSearch => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("step schedule parameters out of range"))
        }
    }
}

/// A search direction and the active coordinates/blocks that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub p: Vector,
    pub active_set: Vec<usize>,
}

/// Search direction of `algorithm` at `x`. Returns [`Error::Converged`]
/// when the gradient vanishes.
pub fn search_direction<O: Objective + ?Sized>(
    algorithm: &Algorithm,
    oracle: &O,
    x: &Vector,
    tie_tolerance: f64,
) -> Result<Direction> {
    let g = eval_gradient(oracle, x)?;
    let lambda = -&g;
    let n = x.len();
    match algorithm {
        Algorithm::Gradient => {
            if g.iter().all(|&c| c == 0.0) {
                return Err(Error::Converged);
            }
            Ok(Direction {
                p: lambda,
                active_set: (0..n).collect(),
            })
        }
        Algorithm::Newton => {
            if g.iter().all(|&c| c == 0.0) {
                return Err(Error::Converged);
            }
            let hess = eval_hessian(oracle, x)?;
            let p = hess
                .lu()
                .solve(&lambda)
                .filter(is_finite)
                .ok_or(Error::SingularMetric)?;
            Ok(Direction {
                p,
                active_set: (0..n).collect(),
            })
        }
        Algorithm::CoordinateDescent => {
            let active = algorithm.clf(tie_tolerance)?.active_set(&lambda)?;
            Ok(Direction {
                p: -active.q.component_mul(&g),
                active_set: active.indices,
            })
        }
        Algorithm::BlockCoordinateDescent(blocks) => {
            let active = algorithm.clf(tie_tolerance)?.active_set(&lambda)?;
            Ok(Direction {
                p: -active.q.component_mul(&blocks.apply(&g)),
                active_set: active.indices,
            })
        }
        Algorithm::SignCoordinateDescent => {
            let active = algorithm.clf(tie_tolerance)?.active_set(&lambda)?;
            let sign = g.map(|c| if c == 0.0 { 0.0 } else { c.signum() });
            Ok(Direction {
                p: -active.q.component_mul(&sign),
                active_set: active.indices,
            })
        }
    }
}

fn take_step<O: Objective + ?Sized>(
    algorithm: &Algorithm,
    oracle: &O,
    x: &Vector,
    alpha: f64,
    tie_tolerance: f64,
) -> Result<Vector> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("step size must be nonnegative"));
    }
    let d = search_direction(algorithm, oracle, x, tie_tolerance)?;
    Ok(x + d.p * alpha)
}

/// Damped Newton step `x - α [∇²E]⁻¹ ∇E`. A stationary `x` is returned unchanged.
pub fn step_newton<O: Objective + ?Sized>(oracle: &O, x: &Vector, alpha: f64) -> Result<Vector> {
    match take_step(&Algorithm::Newton, oracle, x, alpha, DEFAULT_TIE_TOLERANCE) {
        Err(Error::Converged) => Ok(x.clone()),
        r => r,
    }
}

/// Gradient step `x - α ∇E`.
pub fn step_gradient<O: Objective + ?Sized>(oracle: &O, x: &Vector, alpha: f64) -> Result<Vector> {
    match take_step(&Algorithm::Gradient, oracle, x, alpha, DEFAULT_TIE_TOLERANCE) {
        Err(Error::Converged) => Ok(x.clone()),
        r => r,
    }
}

/// Gauss–Southwell coordinate step `x - α q∘∇E`.
pub fn step_cd<O: Objective + ?Sized>(
    oracle: &O,
    x: &Vector,
    alpha: f64,
    tie_tolerance: f64,
) -> Result<Vector> {
    take_step(&Algorithm::CoordinateDescent, oracle, x, alpha, tie_tolerance)
}

/// Block coordinate step `x - α q∘(Q∇E)`.
pub fn step_block_cd<O: Objective + ?Sized>(
    oracle: &O,
    x: &Vector,
    alpha: f64,
    blocks: &BlockStructure,
    tie_tolerance: f64,
) -> Result<Vector> {
    take_step(
        &Algorithm::BlockCoordinateDescent(blocks.clone()),
        oracle,
        x,
        alpha,
        tie_tolerance,
    )
}

/// Normalized coordinate step `x - α q∘sign(∇E)`.
pub fn step_sign_cd<O: Objective + ?Sized>(oracle: &O, x: &Vector, alpha: f64) -> Result<Vector> {
    take_step(
        &Algorithm::SignCoordinateDescent,
        oracle,
        x,
        alpha,
        DEFAULT_TIE_TOLERANCE,
    )
}

/// Result of one coordinate-descent step taken through the full
/// costate → CLF → maximum-principle → Euler pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerStep {
    pub x_next: Vector,
    pub u: Vector,
    pub active_set: Vec<usize>,
    pub h: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub nu0: f64,
}

impl ControllerStep {
    /// The optimization step size `α = h σ γ ν₀`.
    pub fn alpha(&self) -> f64 {
        self.h * self.sigma * self.gamma * self.nu0
    }
}

/// One coordinate-descent step derived through the controller with the
/// Hessian metric, `x + h u` where `u` maximizes CLF dissipation over
/// `{u : ⟨u, ∇²E u⟩ ≤ Δ}`.
pub fn step_cd_via_controller<O: Objective + ?Sized>(
    oracle: &O,
    x: &Vector,
    nu0: f64,
    delta: f64,
    h: f64,
    tie_tolerance: f64,
) -> Result<ControllerStep> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("Euler step must be positive"));
    }
    let costate = costate_from_gradient(oracle, x, nu0)?;
    let clf = LyapunovFunction::max_squares().with_tie_tolerance(tie_tolerance)?;
    let sel = clf.unbiased_subgradient(&costate.lambda_x)?;
    let set = ControlSet::new(MetricKind::Hessian, delta)?;
    let out = max_principle_control(&set, oracle, x, &sel)?;
    Ok(ControllerStep {
        x_next: x + &out.u * h,
        u: out.u,
        active_set: sel.active.indices,
        h,
        sigma: out.sigma,
        gamma: sel.gamma,
        nu0,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Backtracking could not find a decreasing step.
    LineSearchStalled,
    Failed(Error),
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iter",
            StopReason::LineSearchStalled => "line_search_stalled",
            StopReason::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    /// One record per visited iterate, including the final one.
    pub records: Vec<TraceRecord>,
    pub final_x: Vector,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub eps_inf: f64,
    pub max_iter: usize,
    pub tie_tolerance: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            eps_inf: DEFAULT_EPS_INF,
            max_iter: DEFAULT_MAX_ITER,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

impl RunOptions {
    pub fn new(eps_inf: f64, max_iter: usize) -> Self {
        RunOptions {
            eps_inf,
            max_iter,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_inf > 0.0) {
            return Err(Error::invalid("eps_inf must be positive"));
        }
        if !(self.tie_tolerance >= 0.0) {
            return Err(Error::invalid("tie tolerance must be nonnegative"));
        }
        Ok(())
    }
}

enum StepChoice {
    Alpha(f64),
    Stalled,
}

#[allow(clippy::too_many_arguments)]
fn choose_step<O: Objective + ?Sized>(
    schedule: &StepSchedule,
    k: usize,
    oracle: &O,
    x: &Vector,
    value: f64,
    grad: &Vector,
    p: &Vector,
) -> Result<StepChoice> {
    Ok(match *schedule {
        StepSchedule::Constant { alpha } => StepChoice::Alpha(alpha),
        StepSchedule::Diminishing { alpha0 } => StepChoice::Alpha(alpha0 / (k + 1) as f64),
        StepSchedule::QuadraticLineSearch => {
            let curvature = p.dot(&(eval_hessian(oracle, x)? * p));
            let slope = grad.dot(p);
            if curvature > 0.0 && slope < 0.0 {
                StepChoice::Alpha(-slope / curvature)
            } else {
                StepChoice::Stalled
            }
        }
        StepSchedule::Backtracking {
            alpha0,
            shrink,
            sufficient_decrease,
        } => {
            let slope = grad.dot(p);
            if !(slope < 0.0) {
                return Ok(StepChoice::Stalled);
            }
            let mut alpha = alpha0;
            for _ in 0..MAX_BACKTRACKS {
                let trial = x + p * alpha;
                let e = oracle.value(&trial);
                if e.is_finite() && e < value && e <= value + sufficient_decrease * alpha * slope {
                    return Ok(StepChoice::Alpha(alpha));
                }
                alpha *= shrink;
            }
            StepChoice::Stalled
        }
    })
}

/// Whether `x` and everything recorded about it are finite.
fn finite_iterate<O: Objective + ?Sized>(oracle: &O, clf: &LyapunovFunction, x: &Vector) -> bool {
    if !is_finite(x) || !oracle.value(x).is_finite() {
        return false;
    }
    let g = oracle.gradient(x);
    is_finite(&g) && clf.value(&-g).is_ok_and(f64::is_finite)
}

struct Recorder<'a, O: ?Sized> {
    oracle: &'a O,
    clf: LyapunovFunction,
    records: Vec<TraceRecord>,
    t: f64,
}

impl<O: Objective + ?Sized> Recorder<'_, O> {
    /// Appends the record for iterate `x`, given the step taken from it
    /// (zero step and `next = None` for the final iterate).
    fn push(
        &mut self,
        k: usize,
        x: &Vector,
        grad: &Vector,
        value: f64,
        active_set: Vec<usize>,
        alpha: f64,
        next: Option<&Vector>,
    ) -> Result<()> {
        let lambda = -grad;
        let clf_value = self.clf.value(&lambda)?;
        let u = match next {
            Some(n) => n - x,
            None => Vector::zeros(x.len()),
        };
        let dissipation_rate = match next {
            Some(n) => clf_value - self.clf.value(&-eval_gradient(self.oracle, n)?)?,
            None => 0.0,
        };
        let costate = CostateState::new(lambda, 1.0)?;
        let gamma = if active_set.is_empty() {
            0.0
        } else {
            1.0 / active_set.len() as f64
        };
        self.records.push(TraceRecord {
            k,
            t: self.t,
            hamiltonian: hamiltonian(&costate, self.oracle, x, &u)?,
            x: x.clone(),
            u,
            objective: value,
            grad_inf: inf_norm(grad),
            clf_value,
            active_set,
            step: alpha,
            dissipation_rate,
            sigma: 1.0,
            gamma,
        });
        self.t += alpha;
        Ok(())
    }
}

/// Iterates `algorithm` from `x0` until `‖∇E‖∞ < eps_inf` or `max_iter` steps.
///
/// Controller failures mid-run (e.g. a singular Hessian for Newton) end the
/// run with [`StopReason::Failed`] and keep the trace up to that point.
pub fn run<O: Objective + ?Sized>(
    algorithm: &Algorithm,
    oracle: &O,
    x0: &Vector,
    schedule: &StepSchedule,
    options: &RunOptions,
) -> Result<RunResult> {
    schedule.validate()?;
    options.validate()?;
    let mut rec = Recorder {
        oracle,
        clf: algorithm.clf(options.tie_tolerance)?,
        records: Vec::new(),
        t: 0.0,
    };
    let mut x = x0.clone();
    let mut k = 0usize;
    let stop = loop {
        let grad = eval_gradient(oracle, &x)?;
        let value = eval_value(oracle, &x)?;
        if inf_norm(&grad) < options.eps_inf {
            rec.push(k, &x, &grad, value, Vec::new(), 0.0, None)?;
            break StopReason::Converged;
        }
        if k >= options.max_iter {
            rec.push(k, &x, &grad, value, Vec::new(), 0.0, None)?;
            break StopReason::MaxIterations;
        }
        let dir = match search_direction(algorithm, oracle, &x, options.tie_tolerance) {
            Ok(d) => d,
            Err(Error::Converged) => {
                rec.push(k, &x, &grad, value, Vec::new(), 0.0, None)?;
                break StopReason::Converged;
            }
            Err(e @ (Error::SingularMetric | Error::NumericOverflow(_))) => {
                rec.push(k, &x, &grad, value, Vec::new(), 0.0, None)?;
                break StopReason::Failed(e);
            }
            Err(e) => return Err(e),
        };
        let alpha = match choose_step(schedule, k, oracle, &x, value, &grad, &dir.p)? {
            StepChoice::Alpha(a) => a,
            StepChoice::Stalled => {
                rec.push(k, &x, &grad, value, dir.active_set, 0.0, None)?;
                break StopReason::LineSearchStalled;
            }
        };
        let next = &x + &dir.p * alpha;
        if !finite_iterate(oracle, &rec.clf, &next) {
            rec.push(k, &x, &grad, value, dir.active_set, 0.0, None)?;
            break StopReason::Failed(Error::NumericOverflow("iterate"));
        }
        rec.push(k, &x, &grad, value, dir.active_set, alpha, Some(&next))?;
        x = next;
        k += 1;
    };
    Ok(RunResult {
        records: rec.records,
        final_x: x,
        iterations: k,
        converged: stop == StopReason::Converged,
        stop,
    })
}

/// Classical Gauss–Southwell coordinate descent, written without the CLF
/// machinery: pick the first coordinate of largest `|∂ᵢE|` and move along it.
pub fn reference_gauss_southwell<O: Objective + ?Sized>(
    oracle: &O,
    x0: &Vector,
    schedule: &StepSchedule,
    options: &RunOptions,
) -> Result<RunResult> {
    schedule.validate()?;
    options.validate()?;
    let mut rec = Recorder {
        oracle,
        clf: LyapunovFunction::max_squares(),
        records: Vec::new(),
        t: 0.0,
    };
    let mut x = x0.clone();
    let mut k = 0usize;
    let stop = loop {
        let grad = eval_gradient(oracle, &x)?;
        let value = eval_value(oracle, &x)?;
        let mut best = 0;
        for i in 1..grad.len() {
            if grad[i].abs() > grad[best].abs() {
                best = i;
            }
        }
        let gi = grad[best];
        if gi.abs() < options.eps_inf {
            rec.push(k, &x, &grad, value, Vec::new(), 0.0, None)?;
            break StopReason::Converged;
        }
        if k >= options.max_iter {
            rec.push(k, &x, &grad, value, Vec::new(), 0.0, None)?;
            break StopReason::MaxIterations;
        }
        let alpha = match *schedule {
            StepSchedule::Constant { alpha } => Some(alpha),
            StepSchedule::Diminishing { alpha0 } => Some(alpha0 / (k + 1) as f64),
            StepSchedule::QuadraticLineSearch => {
                let hii = eval_hessian(oracle, &x)?[(best, best)];
                (hii > 0.0).then(|| 1.0 / hii)
            }
            StepSchedule::Backtracking {
                alpha0,
                shrink,
                sufficient_decrease,
            } => {
                let mut alpha = alpha0;
                let mut found = None;
                for _ in 0..MAX_BACKTRACKS {
                    let mut trial = x.clone();
                    trial[best] -= alpha * gi;
                    let e = oracle.value(&trial);
                    if e.is_finite() && e < value && e <= value - sufficient_decrease * alpha * gi * gi {
                        found = Some(alpha);
                        break;
                    }
                    alpha *= shrink;
                }
                found
            }
        };
        let Some(alpha) = alpha else {
            rec.push(k, &x, &grad, value, alloc::vec![best], 0.0, None)?;
            break StopReason::LineSearchStalled;
        };
        let mut next = x.clone();
        next[best] -= alpha * gi;
        if !finite_iterate(oracle, &rec.clf, &next) {
            rec.push(k, &x, &grad, value, alloc::vec![best], 0.0, None)?;
            break StopReason::Failed(Error::NumericOverflow("iterate"));
        }
        rec.push(k, &x, &grad, value, alloc::vec![best], alpha, Some(&next))?;
        x = next;
        k += 1;
    };
    Ok(RunResult {
        records: rec.records,
        final_x: x,
        iterations: k,
        converged: stop == StopReason::Converged,
        stop,
    })
}
