//! Maximum-principle controller over the metricized control set
//! `U = {u : ⟨u, W u⟩ ≤ Δ}`, and the Newton control.
//!
//! Maximizing the linear dissipation objective `⟨d, ∇²E u⟩` over the
//! ellipsoid `U` gives `W u = σ ∇²E d`, with `σ` chosen so that `u` lies on the
//! boundary of `U`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::clf::SubgradientSelection;
use crate::costate::CostateState;
use crate::linalg::{check_dim, cholesky, spd_solve};
use crate::objectives::{eval_hessian, Objective};
use crate::{Error, Matrix, Result, Vector};

/// Relative slack used by [`verify_maximizer`].
pub const MAXIMIZER_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum MetricKind {
    /// `W(x) = ∇²E(x)`.
    Hessian,
    Identity,
    FixedSpd(Matrix),
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Hessian => "hessian",
            MetricKind::Identity => "identity",
            MetricKind::FixedSpd(_) => "fixed_spd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    metric: MetricKind,
    delta: f64,
    ridge: f64,
}

impl ControlSet {
    pub fn new(metric: MetricKind, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if let MetricKind::FixedSpd(w) = &metric {
            if w.nrows() != w.ncols() {
                return Err(Error::invalid("fixed metric must be square"));
            }
            cholesky(w)?;
        }
        Ok(ControlSet {
            metric,
            delta,
            ridge: 0.0,
        })
    }

    /// Hessian metric with `Δ = 1`.
    pub fn hessian() -> Self {
        ControlSet {
            metric: MetricKind::Hessian,
            delta: 1.0,
            ridge: 0.0,
        }
    }

    /// Adds `ε I` to the realized metric. Off by default.
    pub fn with_ridge(mut self, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) || !ridge.is_finite() {
            return Err(Error::invalid("ridge must be nonnegative"));
        }
        self.ridge = ridge;
        Ok(self)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(ControlSet {
            delta,
            ..self.clone()
        })
    }

    pub fn metric(&self) -> &MetricKind {
        &self.metric
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// `W(x)`, including the ridge. Positive definiteness is checked by the
    /// factorization at the point of use.
    pub fn metric_at<O: Objective + ?Sized>(&self, oracle: &O, x: &Vector) -> Result<Matrix> {
        let n = oracle.dim();
        let mut w = match &self.metric {
            MetricKind::Hessian => eval_hessian(oracle, x)?,
            MetricKind::Identity => Matrix::identity(n, n),
            MetricKind::FixedSpd(w) => {
                check_dim(n, w.nrows())?;
                w.clone()
            }
        };
        if self.ridge > 0.0 {
            for i in 0..n {
                w[(i, i)] += self.ridge;
            }
        }
        Ok(w)
    }

    /// `⟨u, W u⟩` at `x`.
    pub fn metric_norm_squared<O: Objective + ?Sized>(
        &self,
        oracle: &O,
        x: &Vector,
        u: &Vector,
    ) -> Result<f64> {
        let w = self.metric_at(oracle, x)?;
        Ok(u.dot(&(w * u)))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("delta must be positive and finite"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: Vector,
    pub sigma: f64,
    /// `⟨∂V, ∇²E u⟩`, positive when the control dissipates the CLF.
    pub dissipation_rate: f64,
}

/// Maximizer of `⟨d, ∇²E(x) u⟩` over `U`, where `d` is the selected subgradient.
pub fn max_principle_control<O: Objective + ?Sized>(
    set: &ControlSet,
    oracle: &O,
    x: &Vector,
    subgrad: &SubgradientSelection,
) -> Result<ControlOutput> {
    let n = oracle.dim();
    check_dim(n, subgrad.direction.len())?;
    let hess = eval_hessian(oracle, x)?;
    let d = &subgrad.direction;
    let drive = &hess * d;
    let drive_scale = hess.amax() * d.amax() * n as f64;
    if drive.amax() <= f64::EPSILON * drive_scale {
        return Err(Error::DegenerateDrive);
    }
    let w = set.metric_at(oracle, x)?;
    let chol = cholesky(&w)?;
    let u0 = spd_solve(&chol, &w, &drive);
    let quad = drive.dot(&u0);
    if !(quad > 0.0) || !quad.is_finite() {
        return Err(Error::NonSpdMetric);
    }
    let sigma = libm::sqrt(set.delta / quad);
    Ok(ControlOutput {
        u: u0 * sigma,
        sigma,
        dissipation_rate: sigma * quad,
    })
}

/// Brute-force check of the maximum principle: samples `samples` controls on
/// the boundary of `U` and reports whether any beats `u` by more than
/// [`MAXIMIZER_TOLERANCE`] relative.
pub fn verify_maximizer<O: Objective + ?Sized>(
    set: &ControlSet,
    oracle: &O,
    x: &Vector,
    subgrad: &SubgradientSelection,
    u: &Vector,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let n = oracle.dim();
    check_dim(n, u.len())?;
    check_dim(n, subgrad.direction.len())?;
    let drive = eval_hessian(oracle, x)? * &subgrad.direction;
    let w = set.metric_at(oracle, x)?;
    let candidate = drive.dot(u);
    let slack = MAXIMIZER_TOLERANCE * candidate.abs().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let z = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm2 = z.dot(&(&w * &z));
        if !(norm2 > 0.0) {
            continue;
        }
        let scaled = z * libm::sqrt(set.delta / norm2);
        if drive.dot(&scaled) > candidate + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `u = [∇²E(x)]⁻¹ λ_x`, with no control-set scaling.
///
/// The reported dissipation rate is that of the smooth quadratic CLF,
/// `⟨λ_x, ∇²E u⟩ = ‖λ_x‖²`.
pub fn newton_control<O: Objective + ?Sized>(
    oracle: &O,
    x: &Vector,
    costate: &CostateState,
) -> Result<ControlOutput> {
    check_dim(oracle.dim(), costate.lambda_x.len())?;
    let hess = eval_hessian(oracle, x)?;
    if costate.is_zero() {
        return Ok(ControlOutput {
            u: Vector::zeros(oracle.dim()),
            sigma: 1.0,
            dissipation_rate: 0.0,
        });
    }
    let u = hess
        .clone()
        .lu()
        .solve(&costate.lambda_x)
        .filter(|u| u.iter().all(|c| c.is_finite()))
        .ok_or(Error::SingularMetric)?;
    let dissipation_rate = costate.lambda_x.dot(&(&hess * &u));
    Ok(ControlOutput {
        u,
        sigma: 1.0,
        dissipation_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clf::{ActiveSet, LyapunovFunction};
    use crate::costate::costate_from_gradient;
    use crate::linalg::angle_between;
    use crate::objectives::{Quadratic, Quartic};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn raw_selection(direction: Vector) -> SubgradientSelection {
        let n = direction.len();
        SubgradientSelection {
            direction,
            gamma: 1.0,
            active: ActiveSet {
                indices: (0..n).collect(),
                q: Vector::from_element(n, 1.0),
            },
        }
    }

    #[test]
    fn identity_metric_closed_form() {
        let q = Quadratic::diagonal(&[1.0, 1.0]).unwrap();
        let set = ControlSet::new(MetricKind::Identity, 1.0).unwrap();
        let out = max_principle_control(&set, &q, &v(&[0.0, 0.0]), &raw_selection(v(&[3.0, 4.0])))
            .unwrap();
        assert!((out.u - v(&[0.6, 0.8])).amax() < 1e-15);
        assert!((out.sigma - 0.2).abs() < 1e-15);
        assert!((out.dissipation_rate - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hessian_metric_cancels() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let q = Quadratic::new(a, Vector::zeros(3)).unwrap();
        let d = v(&[0.3, -1.2, 0.7]);
        let out = max_principle_control(&ControlSet::hessian(), &q, &v(&[1.0, 2.0, 3.0]), &raw_selection(d.clone()))
            .unwrap();
        assert!(angle_between(&out.u, &d) < 1e-8);
        let boundary = ControlSet::hessian()
            .metric_norm_squared(&q, &v(&[1.0, 2.0, 3.0]), &out.u)
            .unwrap();
        assert!((boundary - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nullspace_direction_is_degenerate() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let q = Quadratic::new(a, Vector::zeros(2)).unwrap();
        let set = ControlSet::new(MetricKind::Identity, 1.0).unwrap();
        let r = max_principle_control(&set, &q, &v(&[1.0, 1.0]), &raw_selection(v(&[0.0, 2.0])));
        assert_eq!(r, Err(Error::DegenerateDrive));
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let w = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(
            ControlSet::new(MetricKind::FixedSpd(w), 1.0).err(),
            Some(Error::NonSpdMetric)
        );
        // A Hessian metric on a nonconvex point fails at factorization time.
        let rb = crate::objectives::Rosenbrock::new(2).unwrap();
        let out = max_principle_control(
            &ControlSet::hessian(),
            &rb,
            &v(&[0.0, 1.0]),
            &raw_selection(v(&[1.0, 0.0])),
        );
        assert_eq!(out, Err(Error::NonSpdMetric));
        assert!(ControlSet::new(MetricKind::Identity, 0.0).is_err());
    }

    #[test]
    fn maximizer_checks() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = Quadratic::new(a, v(&[0.2, -0.1])).unwrap();
        let x = v(&[1.0, 1.0]);
        let lam = costate_from_gradient(&q, &x, 1.0).unwrap();
        let sel = LyapunovFunction::max_squares()
            .unbiased_subgradient(&lam.lambda_x)
            .unwrap();
        let set = ControlSet::hessian();
        let out = max_principle_control(&set, &q, &x, &sel).unwrap();
        assert!(verify_maximizer(&set, &q, &x, &sel, &out.u, 10_000, 1).unwrap());
        assert!(!verify_maximizer(&set, &q, &x, &sel, &(-&out.u), 10_000, 1).unwrap());
        assert!(!verify_maximizer(&set, &q, &x, &sel, &(&out.u * 0.5), 10_000, 1).unwrap());
    }

    #[test]
    fn newton_control_examples() {
        let q = Quadratic::diagonal(&[1.0, 4.0]).unwrap();
        let lam = costate_from_gradient(&q, &v(&[1.0, 1.0]), 1.0).unwrap();
        assert_eq!(lam.lambda_x, v(&[-1.0, -4.0]));
        let out = newton_control(&q, &v(&[1.0, 1.0]), &lam).unwrap();
        assert_eq!(out.u, v(&[-1.0, -1.0]));
        assert_eq!(out.dissipation_rate, 17.0);

        let zero = costate_from_gradient(&q, &v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(newton_control(&q, &v(&[0.0, 0.0]), &zero).unwrap().u, v(&[0.0, 0.0]));

        let quartic = Quartic::new(1).unwrap();
        let off = CostateState::new(v(&[1.0]), 1.0).unwrap();
        assert_eq!(
            newton_control(&quartic, &v(&[0.0]), &off),
            Err(Error::SingularMetric)
        );
    }
}
