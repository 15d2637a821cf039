//! Per-step records shared by continuous flows and discrete runs.

use alloc::vec::Vec;

use crate::Vector;

/// One row of an iteration trace.
///
/// For flows `t` is integration time and `step` is the Euler/RK step `h`.
/// For discrete runs `t` accumulates the step sizes `α_k`, `step` is `α_k`,
/// `u` is the realized update `x_{k+1} - x_k`, and `dissipation_rate` is
/// the CLF decrement `V(λ_k) - V(λ_{k+1})` over the step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub t: f64,
    pub x: Vector,
    pub u: Vector,
    /// `E(x)`, the state `y` of the lifted control problem.
    pub objective: f64,
    pub grad_inf: f64,
    pub clf_value: f64,
    pub hamiltonian: f64,
    pub active_set: Vec<usize>,
    pub step: f64,
    pub dissipation_rate: f64,
    pub sigma: f64,
    pub gamma: f64,
}
