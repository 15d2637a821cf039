//! Objective oracles, the benchmark catalog, and finite-difference
//! verification of analytic derivatives.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{check_dim, inf_norm, is_finite, min_eigenvalue, symmetrize};
use crate::{Error, Matrix, Result, Vector};

/// A twice-differentiable objective `E: R^n -> R`.
///
/// Implementors supply raw evaluations; the `eval_*` functions in this module
/// add the dimension and finiteness checks every caller relies on.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> Matrix;
}

pub fn eval_value<O: Objective + ?Sized>(oracle: &O, x: &Vector) -> Result<f64> {
    check_point(oracle, x)?;
    let v = oracle.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericOverflow("objective value"))
    }
}

pub fn eval_gradient<O: Objective + ?Sized>(oracle: &O, x: &Vector) -> Result<Vector> {
    check_point(oracle, x)?;
    let g = oracle.gradient(x);
    check_dim(oracle.dim(), g.len())?;
    if is_finite(&g) {
        Ok(g)
    } else {
        Err(Error::NumericOverflow("objective gradient"))
    }
}

/// Hessian at `x`, symmetrized so that downstream factorizations see an
/// exactly symmetric matrix.
pub fn eval_hessian<O: Objective + ?Sized>(oracle: &O, x: &Vector) -> Result<Matrix> {
    check_point(oracle, x)?;
    let mut h = oracle.hessian(x);
    let n = oracle.dim();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.nrows(),
        });
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericOverflow("objective Hessian"));
    }
    symmetrize(&mut h);
    Ok(h)
}

fn check_point<O: Objective + ?Sized>(oracle: &O, x: &Vector) -> Result<()> {
    check_dim(oracle.dim(), x.len())?;
    if is_finite(x) {
        Ok(())
    } else {
        Err(Error::invalid("point has non-finite entries"))
    }
}

/// `E(x) = ½ (x - c)ᵀ A (x - c)` with symmetric `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    matrix: Matrix,
    center: Vector,
}

impl Quadratic {
    pub fn new(matrix: Matrix, center: Vector) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::invalid("quadratic must have positive dimension"));
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        let mut matrix = matrix;
        symmetrize(&mut matrix);
        Ok(Quadratic { matrix, center })
    }

    /// Centered diagonal quadratic `½ Σ dᵢ xᵢ²`.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let d = Vector::from_column_slice(diag);
        Quadratic::new(Matrix::from_diagonal(&d), Vector::zeros(diag.len()))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.matrix * &d))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.matrix * (x - &self.center)
    }

    fn hessian(&self, _x: &Vector) -> Matrix {
        self.matrix.clone()
    }
}

/// L2-regularized logistic loss
/// `E(w) = (1/m) Σ log(1 + exp(-yᵢ zᵢᵀw)) + (μ/2)‖w‖²` with labels `yᵢ = ±1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticL2 {
    features: Matrix,
    labels: Vector,
    l2: f64,
}

impl LogisticL2 {
    pub fn new(features: Matrix, labels: Vector, l2: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::invalid("logistic problem needs samples and features"));
        }
        if !(l2 >= 0.0) {
            return Err(Error::invalid("L2 weight must be nonnegative"));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid("labels must be +1 or -1"));
        }
        Ok(LogisticL2 {
            features,
            labels,
            l2,
        })
    }

    fn margins(&self, w: &Vector) -> Vector {
        (&self.features * w).component_mul(&self.labels)
    }
}

/// Neumaier's compensated summation.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
    for t in terms {
        let next = sum + t;
        carry += if sum.abs() >= t.abs() {
            (sum - next) + t
        } else {
            (t - next) + sum
        };
        sum = next;
    }
    sum + carry
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + libm::log1p(libm::exp(-t.abs()))
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

impl Objective for LogisticL2 {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, w: &Vector) -> f64 {
        let m = self.features.nrows() as f64;
        // Compensated sums keep the rounding noise near one ulp, so line
        // searches still see the tiny decreases close to the minimizer.
        let loss = compensated_sum(self.margins(w).iter().map(|&t| softplus(-t)));
        let ridge = compensated_sum(w.iter().map(|&c| c * c));
        compensated_sum([loss / m, 0.5 * self.l2 * ridge])
    }

    fn gradient(&self, w: &Vector) -> Vector {
        let m = self.features.nrows() as f64;
        // d/dt softplus(-t) = -sigmoid(-t)
        let coef = self
            .margins(w)
            .zip_map(&self.labels, |t, y| -y * sigmoid(-t) / m);
        self.features.tr_mul(&coef) + w * self.l2
    }

    fn hessian(&self, w: &Vector) -> Matrix {
        let m = self.features.nrows() as f64;
        let weights = self.margins(w).map(|t| {
            let s = sigmoid(t);
            s * (1.0 - s) / m
        });
        let mut scaled = self.features.clone();
        for (mut row, &c) in scaled.row_iter_mut().zip(weights.iter()) {
            row *= c;
        }
        let n = self.dim();
        self.features.tr_mul(&scaled) + Matrix::identity(n, n) * self.l2
    }
}

/// Chained Rosenbrock function `Σ 100 (x_{i+1} - x_i²)² + (1 - x_i)²`.
/// Nonconvex; kept in the catalog as an out-of-hypothesis stress case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rosenbrock {
    dim: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("rosenbrock needs dimension >= 2"));
        }
        Ok(Rosenbrock { dim })
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        (0..self.dim - 1)
            .map(|i| {
                let a = x[i + 1] - x[i] * x[i];
                let b = 1.0 - x[i];
                100.0 * a * a + b * b
            })
            .sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for i in 0..self.dim - 1 {
            let a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
        g
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let mut h = Matrix::zeros(self.dim, self.dim);
        for i in 0..self.dim - 1 {
            h[(i, i)] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
            h[(i, i + 1)] -= 400.0 * x[i];
            h[(i + 1, i)] -= 400.0 * x[i];
            h[(i + 1, i + 1)] += 200.0;
        }
        h
    }
}

/// `E(x) = Σ xᵢ⁴ / 4`; convex with a singular Hessian at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quartic {
    dim: usize,
}

impl Quartic {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("quartic needs positive dimension"));
        }
        Ok(Quartic { dim })
    }
}

impl Objective for Quartic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        x.iter().map(|v| 0.25 * (v * v) * (v * v)).sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x.map(|v| v * v * v)
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::from_diagonal(&x.map(|v| 3.0 * v * v))
    }
}

/// Names accepted by [`make_benchmark`].
pub const CATALOG: [&str; 4] = [
    "random_spd_quadratic",
    "diagonal_quadratic",
    "logistic_l2",
    "rosenbrock",
];

/// Shift added to `MᵀM` in random SPD quadratics.
pub const SPD_SHIFT: f64 = 1e-2;

/// Parameters for catalog problems. Fields irrelevant to a problem are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams {
    pub dim: usize,
    pub seed: u64,
    /// Diagonal for `diagonal_quadratic`; defaults to `(1, 4, 9, ...)`.
    pub diag: Option<Vec<f64>>,
    /// Regularization weight for `logistic_l2`.
    pub l2: f64,
    /// Sample count for `logistic_l2`; defaults to `4 * dim`.
    pub samples: Option<usize>,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            dim: 2,
            seed: 0,
            diag: None,
            l2: 0.1,
            samples: None,
        }
    }
}

impl ProblemParams {
    pub fn with_dim(dim: usize, seed: u64) -> Self {
        ProblemParams {
            dim,
            seed,
            ..Default::default()
        }
    }
}

/// A named catalog problem together with what is known about it.
pub struct BenchmarkProblem {
    pub name: String,
    pub oracle: Box<dyn Objective>,
    pub known_minimizer: Option<Vector>,
    pub strictly_convex: bool,
}

impl core::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("dim", &self.oracle.dim())
            .field("known_minimizer", &self.known_minimizer)
            .field("strictly_convex", &self.strictly_convex)
            .finish()
    }
}

impl Objective for BenchmarkProblem {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.oracle.value(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.oracle.gradient(x)
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        self.oracle.hessian(x)
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    // Filled column by column so the stream order is fixed by the shape alone.
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Builds a catalog problem. Random problems are a pure function of `params`.
pub fn make_benchmark(name: &str, params: &ProblemParams) -> Result<BenchmarkProblem> {
    let n = params.dim;
    if n == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    match name {
        "random_spd_quadratic" => {
            // M is 2n x n and scaled so the spectrum of MᵀM stays O(1).
            let m = gaussian_matrix(&mut rng, 2 * n, n) / libm::sqrt((2 * n) as f64);
            let a = m.tr_mul(&m) + Matrix::identity(n, n) * SPD_SHIFT;
            let center = gaussian_vector(&mut rng, n);
            Ok(BenchmarkProblem {
                name: name.to_string(),
                oracle: Box::new(Quadratic::new(a, center.clone())?),
                known_minimizer: Some(center),
                strictly_convex: true,
            })
        }
        "diagonal_quadratic" => {
            let diag: Vec<f64> = match &params.diag {
                Some(d) => {
                    check_dim(n, d.len())?;
                    d.clone()
                }
                None => (1..=n).map(|i| (i * i) as f64).collect(),
            };
            if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
                return Err(Error::invalid("diagonal entries must be positive"));
            }
            Ok(BenchmarkProblem {
                name: name.to_string(),
                oracle: Box::new(Quadratic::diagonal(&diag)?),
                known_minimizer: Some(Vector::zeros(n)),
                strictly_convex: true,
            })
        }
        "logistic_l2" => {
            if !(params.l2 > 0.0) {
                return Err(Error::invalid("logistic_l2 needs a positive L2 weight"));
            }
            let samples = params.samples.unwrap_or(4 * n);
            let features = gaussian_matrix(&mut rng, samples, n);
            let truth = gaussian_vector(&mut rng, n);
            let noise = gaussian_vector(&mut rng, samples);
            let scores = &features * &truth + noise * 0.5;
            let labels = scores.map(|s| if s > 0.0 { 1.0 } else { -1.0 });
            Ok(BenchmarkProblem {
                name: name.to_string(),
                oracle: Box::new(LogisticL2::new(features, labels, params.l2)?),
                known_minimizer: None,
                strictly_convex: true,
            })
        }
        "rosenbrock" => Ok(BenchmarkProblem {
            name: name.to_string(),
            oracle: Box::new(Rosenbrock::new(n)?),
            known_minimizer: Some(Vector::from_element(n, 1.0)),
            strictly_convex: false,
        }),
        other => Err(Error::NotFound(other.to_string())),
    }
}

/// Conventional starting point for a catalog problem.
pub fn default_start(name: &str, dim: usize) -> Vector {
    match name {
        "rosenbrock" => Vector::from_fn(dim, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 }),
        _ => Vector::from_element(dim, 1.0),
    }
}

/// Maximum error of analytic derivatives against central differences,
/// relative to `max(1, |analytic|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport {
    pub gradient_error: f64,
    pub hessian_error: f64,
}

/// Finite-difference step `1e-5 · (1 + ‖x‖∞)`.
pub fn default_fd_step(x: &Vector) -> f64 {
    1e-5 * (1.0 + inf_norm(x))
}

pub fn finite_difference_check<O: Objective + ?Sized>(
    oracle: &O,
    x: &Vector,
    step: f64,
) -> Result<FdReport> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let n = oracle.dim();
    let grad = eval_gradient(oracle, x)?;
    let hess = eval_hessian(oracle, x)?;
    let mut fd_grad = Vector::zeros(n);
    let mut fd_hess = Matrix::zeros(n, n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += step;
        minus[j] -= step;
        // Use the realized spacing so rounding in x ± h does not bias the quotient.
        let width = plus[j] - minus[j];
        fd_grad[j] = (eval_value(oracle, &plus)? - eval_value(oracle, &minus)?) / width;
        let column = (eval_gradient(oracle, &plus)? - eval_gradient(oracle, &minus)?) / width;
        fd_hess.set_column(j, &column);
    }
    let gradient_error = inf_norm(&(&grad - fd_grad)) / inf_norm(&grad).max(1.0);
    let hess_scale = hess.amax().max(1.0);
    let hessian_error = (&hess - fd_hess).amax() / hess_scale;
    Ok(FdReport {
        gradient_error,
        hessian_error,
    })
}

/// Smallest Hessian eigenvalue at `x`; positive on strictly convex problems.
pub fn min_hessian_eigenvalue<O: Objective + ?Sized>(oracle: &O, x: &Vector) -> Result<f64> {
    Ok(min_eigenvalue(&eval_hessian(oracle, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn diag14() -> Quadratic {
        Quadratic::diagonal(&[1.0, 4.0]).unwrap()
    }

    #[test]
    fn quadratic_values() {
        let q = diag14();
        assert_eq!(eval_value(&q, &v(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(eval_value(&q, &v(&[1.0, 1.0])).unwrap(), 2.5);
        assert_eq!(eval_gradient(&q, &v(&[1.0, 1.0])).unwrap(), v(&[1.0, 4.0]));
        assert_eq!(eval_gradient(&q, &v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
        let h = eval_hessian(&q, &v(&[3.0, -7.0])).unwrap();
        assert_eq!(h, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let q = diag14();
        let x = v(&[1.0, 2.0, 3.0]);
        let expected = Error::DimensionMismatch {
            expected: 2,
            found: 3,
        };
        assert_eq!(eval_value(&q, &x), Err(expected.clone()));
        assert_eq!(eval_gradient(&q, &x).err(), Some(expected.clone()));
        assert_eq!(eval_hessian(&q, &x).err(), Some(expected));
    }

    #[test]
    fn overflow_is_signalled() {
        let q = Quartic::new(1).unwrap();
        assert_eq!(
            eval_value(&q, &v(&[1e100])),
            Err(Error::NumericOverflow("objective value"))
        );
        assert!(matches!(
            eval_value(&q, &v(&[f64::NAN])),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn quartic_hessian() {
        let q = Quartic::new(1).unwrap();
        assert_eq!(eval_hessian(&q, &v(&[2.0])).unwrap()[(0, 0)], 12.0);
    }

    #[test]
    fn fd_check_on_quadratic_is_tight() {
        let q = diag14();
        let report = finite_difference_check(&q, &v(&[0.3, -1.1]), 1e-5).unwrap();
        assert!(report.gradient_error < 1e-8, "{report:?}");
        assert!(report.hessian_error < 1e-8, "{report:?}");
    }

    #[test]
    fn fd_check_at_minimizer_reports_absolute_error() {
        let q = diag14();
        let report = finite_difference_check(&q, &v(&[0.0, 0.0]), 1e-5).unwrap();
        assert!(report.gradient_error.is_finite());
        assert!(report.gradient_error < 1e-12);
    }

    #[test]
    fn fd_check_rejects_bad_step() {
        let q = diag14();
        for step in [0.0, -1e-3, f64::NAN] {
            assert!(matches!(
                finite_difference_check(&q, &v(&[1.0, 1.0]), step),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn catalog_basic_properties() {
        let p = ProblemParams {
            diag: Some(vec![1.0, 4.0]),
            ..ProblemParams::with_dim(2, 0)
        };
        let d = make_benchmark("diagonal_quadratic", &p).unwrap();
        assert_eq!(d.known_minimizer, Some(v(&[0.0, 0.0])));
        assert!(d.strictly_convex);

        let spd = make_benchmark("random_spd_quadratic", &ProblemParams::with_dim(8, 42)).unwrap();
        assert!(spd.strictly_convex);
        let x = Vector::zeros(8);
        assert!(min_hessian_eigenvalue(&spd, &x).unwrap() > SPD_SHIFT * 0.99);
        let star = spd.known_minimizer.clone().unwrap();
        assert!(inf_norm(&eval_gradient(&spd, &star).unwrap()) < 1e-10);

        let rb = make_benchmark("rosenbrock", &ProblemParams::with_dim(2, 0)).unwrap();
        assert!(!rb.strictly_convex);
        // Hessian is indefinite off the valley floor.
        assert!(min_hessian_eigenvalue(&rb, &v(&[0.0, 1.0])).unwrap() < 0.0);
        let ones = rb.known_minimizer.clone().unwrap();
        assert!(inf_norm(&eval_gradient(&rb, &ones).unwrap()) < 1e-10);
    }

    #[test]
    fn unknown_name_is_not_found() {
        let err = make_benchmark("himmelblau", &ProblemParams::default()).unwrap_err();
        assert_eq!(err, Error::NotFound("himmelblau".into()));
    }

    #[test]
    fn generation_is_deterministic() {
        for name in CATALOG {
            let p = ProblemParams::with_dim(5, 7);
            let a = make_benchmark(name, &p).unwrap();
            let b = make_benchmark(name, &p).unwrap();
            let x = v(&[0.1, -0.2, 0.3, 0.4, -0.5]);
            assert_eq!(a.value(&x).to_bits(), b.value(&x).to_bits());
            assert_eq!(a.gradient(&x), b.gradient(&x));
            assert_eq!(a.hessian(&x), b.hessian(&x));
        }
        let a = make_benchmark("random_spd_quadratic", &ProblemParams::with_dim(5, 7)).unwrap();
        let c = make_benchmark("random_spd_quadratic", &ProblemParams::with_dim(5, 8)).unwrap();
        assert_ne!(a.known_minimizer, c.known_minimizer);
    }
}
