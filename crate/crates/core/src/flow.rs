//! Continuous-time algorithm primitives: integrate `ẋ = u(x)` under a
//! chosen controller and record dissipation and Hamiltonian along the way.
//!
//! The costate is never integrated here. It is read off the integral of
//! motion `λ_x = -ν₀ ∇E(x)` at every stage, which is what makes the recorded
//! Hamiltonian vanish identically.

use alloc::vec::Vec;

use crate::clf::LyapunovFunction;
use crate::controller::{max_principle_control, newton_control, ControlSet};
use crate::costate::{costate_from_gradient, hamiltonian, DEFAULT_NU0};
use crate::linalg::{inf_norm, is_finite};
use crate::objectives::{eval_gradient, eval_value, Objective};
use crate::trace::TraceRecord;
use crate::{Error, Result, Vector};

pub const DEFAULT_FLOW_STEP: f64 = 1e-2;
pub const DEFAULT_STOP_GRAD_TOL: f64 = 1e-8;
pub const DEFAULT_FLOW_HORIZON: f64 = 50.0;

/// How the control-set radius `Δ` is chosen at each state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaRule {
    /// Use the control set's own `Δ`.
    Fixed,
    /// `Δ = c ‖λ_x‖₂²`, so the control shrinks with the costate.
    CostateScaled(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowController {
    Newton,
    MaxPrinciple {
        clf: LyapunovFunction,
        set: ControlSet,
        delta_rule: DeltaRule,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrator {
    Rk4 { h: f64 },
    Euler { h: f64 },
}

impl Integrator {
    pub fn step(&self) -> f64 {
        match *self {
            Integrator::Rk4 { h } | Integrator::Euler { h } => h,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub controller: FlowController,
    pub t0: f64,
    pub tf: f64,
    pub integrator: Integrator,
    pub stop_grad_tol: f64,
    pub nu0: f64,
}

impl FlowConfig {
    pub fn newton() -> Self {
        FlowConfig::with_controller(FlowController::Newton)
    }

    /// Max-principle flow with `Δ = ‖λ_x‖²`.
    pub fn max_principle(clf: LyapunovFunction, set: ControlSet) -> Self {
        FlowConfig::with_controller(FlowController::MaxPrinciple {
            clf,
            set,
            delta_rule: DeltaRule::CostateScaled(1.0),
        })
    }

    fn with_controller(controller: FlowController) -> Self {
        FlowConfig {
            controller,
            t0: 0.0,
            tf: DEFAULT_FLOW_HORIZON,
            integrator: Integrator::Rk4 {
                h: DEFAULT_FLOW_STEP,
            },
            stop_grad_tol: DEFAULT_STOP_GRAD_TOL,
            nu0: DEFAULT_NU0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tf > self.t0) || !self.tf.is_finite() || !self.t0.is_finite() {
            return Err(Error::invalid("flow needs t_f > t_0"));
        }
        let h = self.integrator.step();
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("integrator step must be positive"));
        }
        if !(self.stop_grad_tol > 0.0) {
            return Err(Error::invalid("gradient tolerance must be positive"));
        }
        if !(self.nu0 > 0.0) || !self.nu0.is_finite() {
            return Err(Error::invalid("nu0 must be positive"));
        }
        if let FlowController::MaxPrinciple {
            delta_rule: DeltaRule::CostateScaled(c),
            ..
        } = &self.controller
        {
            if !(*c > 0.0) || !c.is_finite() {
                return Err(Error::invalid("costate-scaled delta factor must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    GradTol,
    TfReached,
    /// The controller could not produce a control (degenerate drive,
    /// non-SPD metric, or singular Hessian).
    Degenerate(Error),
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::GradTol => "grad_tol",
            Termination::TfReached => "t_f_reached",
            Termination::Degenerate(_) => "degenerate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
}

struct ControlEval {
    u: Vector,
    sigma: f64,
    gamma: f64,
    dissipation_rate: f64,
    clf_value: f64,
    active_set: Vec<usize>,
}

impl FlowController {
    fn clf_value(&self, lambda: &Vector) -> Result<f64> {
        match self {
            FlowController::Newton => LyapunovFunction::smooth_quadratic().value(lambda),
            FlowController::MaxPrinciple { clf, .. } => clf.value(lambda),
        }
    }

    fn evaluate<O: Objective + ?Sized>(&self, oracle: &O, x: &Vector, nu0: f64) -> Result<ControlEval> {
        let costate = costate_from_gradient(oracle, x, nu0)?;
        let clf_value = self.clf_value(&costate.lambda_x)?;
        let n = x.len();
        if costate.is_zero() {
            return Ok(ControlEval {
                u: Vector::zeros(n),
                sigma: 0.0,
                gamma: 0.0,
                dissipation_rate: 0.0,
                clf_value,
                active_set: Vec::new(),
            });
        }
        match self {
            FlowController::Newton => {
                let out = newton_control(oracle, x, &costate)?;
                Ok(ControlEval {
                    u: out.u,
                    sigma: out.sigma,
                    gamma: 1.0,
                    dissipation_rate: out.dissipation_rate,
                    clf_value,
                    active_set: (0..n).collect(),
                })
            }
            FlowController::MaxPrinciple {
                clf,
                set,
                delta_rule,
            } => {
                let sel = clf.unbiased_subgradient(&costate.lambda_x)?;
                let out = match delta_rule {
                    DeltaRule::Fixed => max_principle_control(set, oracle, x, &sel)?,
                    DeltaRule::CostateScaled(c) => {
                        let scaled = set.with_delta(c * costate.lambda_x.norm_squared())?;
                        max_principle_control(&scaled, oracle, x, &sel)?
                    }
                };
                Ok(ControlEval {
                    u: out.u,
                    sigma: out.sigma,
                    gamma: sel.gamma,
                    dissipation_rate: out.dissipation_rate,
                    clf_value,
                    active_set: sel.active.indices,
                })
            }
        }
    }

    fn velocity<O: Objective + ?Sized>(&self, oracle: &O, x: &Vector, nu0: f64) -> Result<Vector> {
        match self.evaluate(oracle, x, nu0) {
            Ok(e) => Ok(e.u),
            Err(Error::Converged) => Ok(Vector::zeros(x.len())),
            Err(e) => Err(e),
        }
    }
}

fn is_controller_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateDrive | Error::NonSpdMetric | Error::SingularMetric
    )
}

/// Integrates the algorithm primitive from `x0`.
///
/// The control is recomputed from the current state at every integrator
/// stage. Sampling stops when `‖∇E‖∞ < stop_grad_tol`, when `t_f` is reached,
/// or when the controller degenerates.
pub fn run_flow<O: Objective + ?Sized>(config: &FlowConfig, oracle: &O, x0: &Vector) -> Result<FlowTrace> {
    config.validate()?;
    let nu0 = config.nu0;
    let h_nominal = config.integrator.step();
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut t = config.t0;
    let mut k = 0usize;
    let termination = loop {
        let grad = eval_gradient(oracle, &x)?;
        let grad_inf = inf_norm(&grad);
        let objective = eval_value(oracle, &x)?;
        let eval = match config.controller.evaluate(oracle, &x, nu0) {
            Ok(e) => Ok(e),
            Err(e) if is_controller_failure(&e) => Err(e),
            Err(e) => return Err(e),
        };
        let t_next = (config.t0 + (k + 1) as f64 * h_nominal).min(config.tf);
        let done = if grad_inf < config.stop_grad_tol {
            Some(Termination::GradTol)
        } else if let Err(e) = &eval {
            Some(Termination::Degenerate(e.clone()))
        } else if t >= config.tf {
            Some(Termination::TfReached)
        } else {
            None
        };
        let costate = costate_from_gradient(oracle, &x, nu0)?;
        let record = match eval {
            Ok(e) => TraceRecord {
                k,
                t,
                hamiltonian: hamiltonian(&costate, oracle, &x, &e.u)?,
                x: x.clone(),
                u: e.u,
                objective,
                grad_inf,
                clf_value: e.clf_value,
                active_set: e.active_set,
                step: if done.is_some() { 0.0 } else { t_next - t },
                dissipation_rate: e.dissipation_rate,
                sigma: e.sigma,
                gamma: e.gamma,
            },
            Err(_) => TraceRecord {
                k,
                t,
                x: x.clone(),
                u: Vector::zeros(x.len()),
                objective,
                grad_inf,
                clf_value: config.controller.clf_value(&costate.lambda_x)?,
                hamiltonian: 0.0,
                active_set: Vec::new(),
                step: 0.0,
                dissipation_rate: 0.0,
                sigma: 0.0,
                gamma: 0.0,
            },
        };
        records.push(record);
        if let Some(reason) = done {
            break reason;
        }

        let h = t_next - t;
        let f = |y: &Vector| config.controller.velocity(oracle, y, nu0);
        let stepped = match config.integrator {
            Integrator::Euler { .. } => f(&x).map(|k1| &x + k1 * h),
            Integrator::Rk4 { .. } => (|| {
                let k1 = f(&x)?;
                let k2 = f(&(&x + &k1 * (0.5 * h)))?;
                let k3 = f(&(&x + &k2 * (0.5 * h)))?;
                let k4 = f(&(&x + &k3 * h))?;
                Ok(&x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
            })(),
        };
        x = match stepped {
            Ok(next) => next,
            Err(e) if is_controller_failure(&e) => break Termination::Degenerate(e),
            Err(e) => return Err(e),
        };
        if !is_finite(&x) {
            return Err(Error::NumericOverflow("flow state"));
        }
        t = t_next;
        k += 1;
    };
    Ok(FlowTrace {
        records,
        termination,
    })
}

/// Summary of the dissipation and zero-Hamiltonian invariants over a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationReport {
    pub max_abs_hamiltonian: f64,
    /// Smallest `V_k - V_{k+1}` over consecutive samples with `V_k > 0`;
    /// zero when there are no such pairs.
    pub min_decrement: f64,
    /// Whether `V` strictly decreased across every such pair.
    pub monotone: bool,
}

pub fn dissipation_report(records: &[TraceRecord]) -> Result<DissipationReport> {
    if records.is_empty() {
        return Err(Error::invalid("trace is empty"));
    }
    let max_abs_hamiltonian = records.iter().fold(0.0_f64, |m, r| m.max(r.hamiltonian.abs()));
    let decrements: Vec<f64> = records
        .windows(2)
        .filter(|w| w[0].clf_value > 0.0)
        .map(|w| w[0].clf_value - w[1].clf_value)
        .collect();
    let min_decrement = decrements.iter().cloned().reduce(f64::min).unwrap_or(0.0);
    Ok(DissipationReport {
        max_abs_hamiltonian,
        min_decrement,
        monotone: decrements.iter().all(|&d| d > 0.0),
    })
}
