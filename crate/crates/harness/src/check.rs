//! Self-checks behind the `check` subcommand: derivative oracles on the
//! catalog and spot checks of the CLF and controller invariants.

use ctrlopt::clf::{BlockStructure, LyapunovFunction};
use ctrlopt::controller::{max_principle_control, verify_maximizer, ControlSet};
use ctrlopt::costate::costate_from_gradient;
use ctrlopt::objectives::{
    default_fd_step, finite_difference_check, make_benchmark, min_hessian_eigenvalue, Objective,
    ProblemParams, CATALOG,
};
use ctrlopt::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const HESSIAN_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Finite-difference and curvature checks on every cataloged problem at
/// each dimension in `dims`, over `points` random points.
pub fn derivative_checks(dims: &[usize], points: usize, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in CATALOG {
        for &n in dims {
            let problem = match make_benchmark(name, &ProblemParams::with_dim(n, seed)) {
                Ok(p) => p,
                Err(e) => {
                    out.push(CheckResult {
                        name: format!("{name} N={n}"),
                        passed: false,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let (mut grad_err, mut hess_err, mut min_eig) = (0.0_f64, 0.0_f64, f64::INFINITY);
            let mut failure = None;
            for _ in 0..points {
                let x = random_point(&mut rng, n, 2.0);
                match finite_difference_check(&problem, &x, default_fd_step(&x)) {
                    Ok(r) => {
                        grad_err = grad_err.max(r.gradient_error);
                        hess_err = hess_err.max(r.hessian_error);
                    }
                    Err(e) => failure = Some(e.to_string()),
                }
                if problem.strictly_convex {
                    match min_hessian_eigenvalue(&problem, &x) {
                        Ok(l) => min_eig = min_eig.min(l),
                        Err(e) => failure = Some(e.to_string()),
                    }
                }
            }
            let convex_ok = !problem.strictly_convex || min_eig > 0.0;
            let passed = failure.is_none()
                && grad_err < GRADIENT_TOLERANCE
                && hess_err < HESSIAN_TOLERANCE
                && convex_ok;
            let mut detail = format!("gradient err {grad_err:.2e}, hessian err {hess_err:.2e}");
            if problem.strictly_convex {
                detail.push_str(&format!(", min eigenvalue {min_eig:.3e}"));
            }
            if let Some(f) = failure {
                detail.push_str(&format!(", error: {f}"));
            }
            out.push(CheckResult {
                name: format!("derivatives {name} N={n}"),
                passed,
                detail,
            });
        }
    }
    out
}

fn clfs(n: usize) -> Vec<LyapunovFunction> {
    let sizes: Vec<usize> = (0..n).step_by(2).map(|i| (n - i).min(2)).collect();
    let scales: Vec<f64> = (0..sizes.len()).map(|b| 1.0 + b as f64).collect();
    vec![
        LyapunovFunction::smooth_quadratic(),
        LyapunovFunction::max_squares(),
        LyapunovFunction::block_max(BlockStructure::scaled_identity(sizes, &scales).expect("valid blocks")),
        LyapunovFunction::inf_norm(),
    ]
}

/// Subgradient membership, dissipation, and maximizer dominance on random
/// strictly convex instances.
pub fn invariant_checks(instances: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let mut out = Vec::new();
    for clf in clfs(n) {
        let mut failures = 0usize;
        let mut min_rate = f64::INFINITY;
        for i in 0..instances {
            let mut lambda = random_point(&mut rng, n, 3.0);
            if i % 2 == 1 {
                // Two-way tie above every other entry.
                lambda[0] = 4.0;
                lambda[1] = if i % 4 == 1 { -4.0 } else { 4.0 };
            }
            match clf.unbiased_subgradient(&lambda) {
                Ok(sel) => {
                    if !clf.subdifferential_contains(&lambda, &sel.direction).unwrap_or(false) {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
            let name = if i % 2 == 0 { "random_spd_quadratic" } else { "logistic_l2" };
            let problem = make_benchmark(name, &ProblemParams::with_dim(n, seed + i as u64)).expect("catalog");
            let x = random_point(&mut rng, n, 2.0);
            let set = ControlSet::hessian();
            let ok = costate_from_gradient(&problem, &x, 1.0)
                .and_then(|c| clf.unbiased_subgradient(&c.lambda_x))
                .and_then(|sel| {
                    let control = max_principle_control(&set, &problem, &x, &sel)?;
                    min_rate = min_rate.min(control.dissipation_rate);
                    verify_maximizer(&set, &problem, &x, &sel, &control.u, 200, seed + i as u64)
                        .map(|dominant| dominant && control.dissipation_rate > 0.0)
                })
                .unwrap_or(false);
            if !ok {
                failures += 1;
            }
            debug_assert_eq!(problem.dim(), n);
        }
        out.push(CheckResult {
            name: format!("invariants {}", clf.kind().name()),
            passed: failures == 0,
            detail: format!("{instances} instances, {failures} failures, min dissipation {min_rate:.3e}"),
        });
    }
    out
}
