//! Costate convention, integral of motion, and the Pontryagin Hamiltonian.
//!
//! Along extremals the costate of `x` is pinned to the scaled negative
//! gradient, `λ_x = -ν₀ ∇E(x)`, and the Hamiltonian
//! `H = λ_x·u + ν₀ ∇E(x)·u` vanishes for every control `u`.

use alloc::vec::Vec;

use crate::linalg::{check_dim, inf_norm};
use crate::objectives::{eval_gradient, eval_hessian, Objective};
use crate::{Error, Result, Vector};

/// Default terminal multiplier.
pub const DEFAULT_NU0: f64 = 1.0;

/// Absolute slack allowed on the zero-Hamiltonian identity per unit of
/// `1 + ‖λ_x‖₂‖u‖₂`.
pub const HAMILTONIAN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CostateState {
    pub lambda_x: Vector,
    nu0: f64,
}

impl CostateState {
    pub fn new(lambda_x: Vector, nu0: f64) -> Result<Self> {
        check_nu0(nu0)?;
        Ok(CostateState { lambda_x, nu0 })
    }

    /// Terminal value of `λ_y`, constant along the arc.
    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn is_zero(&self) -> bool {
        self.lambda_x.iter().all(|&v| v == 0.0)
    }
}

fn check_nu0(nu0: f64) -> Result<()> {
    if nu0 > 0.0 && nu0.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("nu0 must be positive and finite"))
    }
}

/// Costate from the integral of motion: `λ_x = -ν₀ ∇E(x)`.
pub fn costate_from_gradient<O: Objective + ?Sized>(
    oracle: &O,
    x: &Vector,
    nu0: f64,
) -> Result<CostateState> {
    check_nu0(nu0)?;
    let g = eval_gradient(oracle, x)?;
    Ok(CostateState {
        lambda_x: g * -nu0,
        nu0,
    })
}

pub fn hamiltonian<O: Objective + ?Sized>(
    costate: &CostateState,
    oracle: &O,
    x: &Vector,
    u: &Vector,
) -> Result<f64> {
    check_dim(oracle.dim(), costate.lambda_x.len())?;
    check_dim(oracle.dim(), u.len())?;
    let g = eval_gradient(oracle, x)?;
    Ok(costate.lambda_x.dot(u) + costate.nu0 * g.dot(u))
}

/// Tolerance `1e-12 · (1 + ‖λ_x‖₂ ‖u‖₂)` for the zero-Hamiltonian check.
pub fn hamiltonian_bound(lambda_x: &Vector, u: &Vector) -> f64 {
    HAMILTONIAN_TOLERANCE * (1.0 + lambda_x.norm() * u.norm())
}

/// Integrates the adjoint equation `dλ_x/dt = -ν₀ ∇²E(x(t)) u(t)` backward
/// from `terminal_lambda` at the last grid time.
///
/// The path between samples is the cubic Hermite interpolant through the
/// states with the sampled controls as slopes; its derivative is used as
/// `u(t)` inside each interval. Each interval is integrated with classical
/// RK4, halving the substep until two successive refinements agree to that
/// interval's share of `ode_tol`.
///
/// Returns `λ_x` at every grid time, in grid order.
pub fn integrate_adjoint<O: Objective + ?Sized>(
    oracle: &O,
    times: &[f64],
    states: &[Vector],
    controls: &[Vector],
    nu0: f64,
    terminal_lambda: &Vector,
    ode_tol: f64,
) -> Result<Vec<Vector>> {
    check_nu0(nu0)?;
    if times.is_empty() || times.len() != states.len() || times.len() != controls.len() {
        return Err(Error::invalid("state and control paths must share the time grid"));
    }
    if !(ode_tol > 0.0) {
        return Err(Error::invalid("ode_tol must be positive"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let n = oracle.dim();
    check_dim(n, terminal_lambda.len())?;
    for (x, u) in states.iter().zip(controls) {
        check_dim(n, x.len())?;
        check_dim(n, u.len())?;
    }

    let last = times.len() - 1;
    let span = times[last] - times[0];
    let mut out = alloc::vec![Vector::zeros(n); times.len()];
    out[last] = terminal_lambda.clone();
    for k in (0..last).rev() {
        let segment = HermiteSegment {
            t0: times[k],
            h: times[k + 1] - times[k],
            x0: &states[k],
            x1: &states[k + 1],
            u0: &controls[k],
            u1: &controls[k + 1],
        };
        let rhs = |t: f64| -> Result<Vector> {
            let (x, xdot) = segment.eval(t);
            Ok(eval_hessian(oracle, &x)? * xdot * -nu0)
        };
        let share = ode_tol * segment.h / span;
        let mut substeps = 1usize;
        let mut coarse = rk4_backward(&rhs, &out[k + 1], segment.t0, segment.h, substeps)?;
        loop {
            substeps *= 2;
            let fine = rk4_backward(&rhs, &out[k + 1], segment.t0, segment.h, substeps)?;
            let converged = inf_norm(&(&fine - &coarse)) <= share;
            coarse = fine;
            if converged || substeps >= 1 << 12 {
                break;
            }
        }
        out[k] = coarse;
    }
    Ok(out)
}

struct HermiteSegment<'a> {
    t0: f64,
    h: f64,
    x0: &'a Vector,
    x1: &'a Vector,
    u0: &'a Vector,
    u1: &'a Vector,
}

impl HermiteSegment<'_> {
    /// Position and velocity of the interpolant at absolute time `t`.
    fn eval(&self, t: f64) -> (Vector, Vector) {
        let s = (t - self.t0) / self.h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let x = self.x0 * h00 + self.u0 * (h10 * self.h) + self.x1 * h01 + self.u1 * (h11 * self.h);
        let xdot = (self.x0 * d00 + self.x1 * d01) / self.h + self.u0 * d10 + self.u1 * d11;
        (x, xdot)
    }
}

/// RK4 from `t0 + h` back to `t0` for a right-hand side independent of λ.
fn rk4_backward<F>(rhs: &F, lambda_end: &Vector, t0: f64, h: f64, substeps: usize) -> Result<Vector>
where
    F: Fn(f64) -> Result<Vector>,
{
    let dt = h / substeps as f64;
    let mut lambda = lambda_end.clone();
    let mut f_hi = rhs(t0 + h)?;
    for i in (0..substeps).rev() {
        let t_lo = t0 + dt * i as f64;
        let f_mid = rhs(t_lo + 0.5 * dt)?;
        let f_lo = rhs(t_lo)?;
        // k2 == k3 because the slope does not depend on λ.
        lambda -= (&f_hi + &f_mid * 4.0 + &f_lo) * (dt / 6.0);
        f_hi = f_lo;
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn diag14() -> Quadratic {
        Quadratic::diagonal(&[1.0, 4.0]).unwrap()
    }

    #[test]
    fn integral_of_motion_values() {
        let q = diag14();
        let c = costate_from_gradient(&q, &v(&[1.0, 1.0]), 1.0).unwrap();
        assert_eq!(c.lambda_x, v(&[-1.0, -4.0]));
        let c2 = costate_from_gradient(&q, &v(&[1.0, 1.0]), 2.0).unwrap();
        assert_eq!(c2.lambda_x, v(&[-2.0, -8.0]));
        let z = costate_from_gradient(&q, &v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn nonpositive_nu0_is_rejected() {
        let q = diag14();
        for nu0 in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                costate_from_gradient(&q, &v(&[1.0, 1.0]), nu0),
                Err(Error::InvalidArgument(_))
            ));
            assert!(CostateState::new(v(&[0.0, 0.0]), nu0).is_err());
        }
    }

    #[test]
    fn hamiltonian_cases() {
        let q = diag14();
        let x = v(&[0.7, -0.3]);
        let c = costate_from_gradient(&q, &x, 1.0).unwrap();
        let u = v(&[2.0, 5.0]);
        let h = hamiltonian(&c, &q, &x, &u).unwrap();
        assert!(h.abs() <= hamiltonian_bound(&c.lambda_x, &u));

        // Off-extremal costate at the minimizer.
        let off = CostateState::new(v(&[1.0, 0.0]), 1.0).unwrap();
        let h = hamiltonian(&off, &q, &v(&[0.0, 0.0]), &v(&[3.0, 0.0])).unwrap();
        assert_eq!(h, 3.0);

        assert_eq!(hamiltonian(&c, &q, &x, &v(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            hamiltonian(&c, &q, &x, &v(&[0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adjoint_stays_zero_on_constant_path() {
        let q = diag14();
        let times = [0.0, 0.5, 1.0];
        let xs = [v(&[0.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0])];
        let us = xs.clone();
        let out = integrate_adjoint(&q, &times, &xs, &us, 1.0, &v(&[0.0, 0.0]), 1e-10).unwrap();
        assert!(out.iter().all(|l| l.iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn adjoint_matches_closed_form_exponential_path() {
        // x(t) = e^{-t} x0 on diag(1,4): λ(t) = -∇E(x(t)) exactly.
        let q = diag14();
        let x0 = v(&[1.0, 1.0]);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let xs: Vec<Vector> = times.iter().map(|t| &x0 * libm::exp(-t)).collect();
        let us: Vec<Vector> = xs.iter().map(|x| -x).collect();
        let terminal = q.gradient(xs.last().unwrap()) * -1.0;
        let tol = 1e-9;
        let out = integrate_adjoint(&q, &times, &xs, &us, 1.0, &terminal, tol).unwrap();
        for (lam, x) in out.iter().zip(&xs) {
            let expected = q.gradient(x) * -1.0;
            assert!(inf_norm(&(lam - expected)) < 10.0 * tol);
        }
        // Norm decays forward in time.
        assert!(out.windows(2).all(|w| w[1].norm() < w[0].norm()));
    }

    #[test]
    fn adjoint_rejects_mismatched_grids() {
        let q = diag14();
        let r = integrate_adjoint(
            &q,
            &[0.0, 1.0],
            &[v(&[0.0, 0.0])],
            &[v(&[0.0, 0.0])],
            1.0,
            &v(&[0.0, 0.0]),
            1e-8,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
