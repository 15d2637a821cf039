//! Control Lyapunov functions of the costate.
//!
//! Four families are provided:
//!
//! * `SmoothQuadratic`: `½‖λ‖²`
//! * `MaxSquares`: `max_i λᵢ²/2`
//! * `BlockMax`: `max_i ½⟨λ⁽ⁱ⁾, Qⁱ λ⁽ⁱ⁾⟩` over a block partition
//! * `InfNorm`: `‖λ‖∞`
//!
//! The max-type families are nonsmooth on tie surfaces. For those the
//! subgradient used by the controller is the equally weighted convex
//! combination of the active pieces, `γ q∘(∂ of the pieces)` with
//! `γ = 1/|active|`.

use alloc::vec::Vec;
use core::ops::Range;

use crate::linalg::{check_dim, cholesky};
use crate::{Error, Matrix, Result, Vector};

/// Default relative tie tolerance.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

/// Tolerance for convex-hull membership of a candidate subgradient.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;

/// Contiguous partition of the coordinates with one SPD metric per block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    metrics: Vec<Matrix>,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>, metrics: Vec<Matrix>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid("block sizes must be positive"));
        }
        if sizes.len() != metrics.len() {
            return Err(Error::invalid("one metric is required per block"));
        }
        for (&n, q) in sizes.iter().zip(&metrics) {
            if q.nrows() != n || q.ncols() != n {
                return Err(Error::invalid("block metric shape does not match block size"));
            }
            if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
                return Err(Error::invalid("block metric must be symmetric"));
            }
            cholesky(q).map_err(|_| Error::invalid("block metric must be positive definite"))?;
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &sizes {
            acc += n;
            offsets.push(acc);
        }
        Ok(BlockStructure {
            sizes,
            offsets,
            metrics,
        })
    }

    /// Blocks of the given sizes with identity metrics.
    pub fn identity(sizes: Vec<usize>) -> Result<Self> {
        let metrics = sizes.iter().map(|&n| Matrix::identity(n, n)).collect();
        BlockStructure::new(sizes, metrics)
    }

    /// Blocks with metrics `sᵢ I`.
    pub fn scaled_identity(sizes: Vec<usize>, scales: &[f64]) -> Result<Self> {
        if scales.len() != sizes.len() {
            return Err(Error::invalid("one scale is required per block"));
        }
        let metrics = sizes
            .iter()
            .zip(scales)
            .map(|(&n, &s)| Matrix::identity(n, n) * s)
            .collect();
        BlockStructure::new(sizes, metrics)
    }

    /// `n` singleton blocks with unit metric.
    pub fn singletons(n: usize) -> Result<Self> {
        BlockStructure::identity(alloc::vec![1; n])
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn metric(&self, block: usize) -> &Matrix {
        &self.metrics[block]
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// `Q λ` with `Q = diag(Q¹, …, Qᵐ)`.
    pub fn apply(&self, lambda: &Vector) -> Vector {
        let mut out = Vector::zeros(lambda.len());
        for b in 0..self.num_blocks() {
            let r = self.range(b);
            let piece = &self.metrics[b] * lambda.rows(r.start, r.len());
            out.rows_mut(r.start, r.len()).copy_from(&piece);
        }
        out
    }

    /// Per-block values `½⟨λ⁽ⁱ⁾, Qⁱ λ⁽ⁱ⁾⟩`.
    pub fn block_values(&self, lambda: &Vector) -> Vec<f64> {
        (0..self.num_blocks())
            .map(|b| {
                let r = self.range(b);
                let piece = lambda.rows(r.start, r.len());
                0.5 * piece.dot(&(&self.metrics[b] * piece))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClfKind {
    SmoothQuadratic,
    MaxSquares,
    BlockMax(BlockStructure),
    InfNorm,
}

impl ClfKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClfKind::SmoothQuadratic => "smooth_quadratic",
            ClfKind::MaxSquares => "max_squares",
            ClfKind::BlockMax(_) => "block_max",
            ClfKind::InfNorm => "inf_norm",
        }
    }
}

/// Coordinates (or blocks, for `BlockMax`) attaining the maximum, and the
/// 0/1 routing vector `q` over coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSet {
    /// Ascending.
    pub indices: Vec<usize>,
    pub q: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientSelection {
    pub direction: Vector,
    pub gamma: f64,
    pub active: ActiveSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovFunction {
    kind: ClfKind,
    tie_tolerance: f64,
}

impl LyapunovFunction {
    pub fn new(kind: ClfKind, tie_tolerance: f64) -> Result<Self> {
        if !(tie_tolerance >= 0.0) || !tie_tolerance.is_finite() {
            return Err(Error::invalid("tie tolerance must be nonnegative"));
        }
        Ok(LyapunovFunction {
            kind,
            tie_tolerance,
        })
    }

    pub fn smooth_quadratic() -> Self {
        LyapunovFunction {
            kind: ClfKind::SmoothQuadratic,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }

    pub fn max_squares() -> Self {
        LyapunovFunction {
            kind: ClfKind::MaxSquares,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }

    pub fn inf_norm() -> Self {
        LyapunovFunction {
            kind: ClfKind::InfNorm,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }

    pub fn block_max(blocks: BlockStructure) -> Self {
        LyapunovFunction {
            kind: ClfKind::BlockMax(blocks),
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }

    pub fn with_tie_tolerance(self, tie_tolerance: f64) -> Result<Self> {
        LyapunovFunction::new(self.kind, tie_tolerance)
    }

    pub fn kind(&self) -> &ClfKind {
        &self.kind
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance
    }

    fn check(&self, lambda: &Vector) -> Result<()> {
        if let ClfKind::BlockMax(b) = &self.kind {
            check_dim(b.dim(), lambda.len())?;
        }
        Ok(())
    }

    pub fn value(&self, lambda: &Vector) -> Result<f64> {
        self.check(lambda)?;
        Ok(match &self.kind {
            ClfKind::SmoothQuadratic => 0.5 * lambda.norm_squared(),
            ClfKind::MaxSquares => lambda.iter().fold(0.0, |m, &l| m.max(0.5 * l * l)),
            ClfKind::BlockMax(b) => b.block_values(lambda).into_iter().fold(0.0, f64::max),
            ClfKind::InfNorm => lambda.amax(),
        })
    }

    /// Per-piece scores whose maxima define the active set.
    fn scores(&self, lambda: &Vector) -> Vec<f64> {
        match &self.kind {
            ClfKind::SmoothQuadratic => alloc::vec![0.5 * lambda.norm_squared()],
            ClfKind::MaxSquares => lambda.iter().map(|&l| l * l).collect(),
            ClfKind::BlockMax(b) => b.block_values(lambda),
            ClfKind::InfNorm => lambda.iter().map(|l| l.abs()).collect(),
        }
    }

    /// Indices whose score is within `τ · max` of the maximum.
    ///
    /// Returns [`Error::Converged`] for `λ = 0`.
    pub fn active_set(&self, lambda: &Vector) -> Result<ActiveSet> {
        self.check(lambda)?;
        if lambda.iter().all(|&l| l == 0.0) {
            return Err(Error::Converged);
        }
        let n = lambda.len();
        if let ClfKind::SmoothQuadratic = self.kind {
            // A single smooth piece: every coordinate is routed.
            return Ok(ActiveSet {
                indices: (0..n).collect(),
                q: Vector::from_element(n, 1.0),
            });
        }
        let scores = self.scores(lambda);
        let max = scores.iter().cloned().fold(0.0, f64::max);
        let threshold = max - self.tie_tolerance * max;
        let indices: Vec<usize> = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= threshold)
            .map(|(i, _)| i)
            .collect();
        let mut q = Vector::zeros(n);
        match &self.kind {
            ClfKind::BlockMax(b) => {
                for &i in &indices {
                    q.rows_range_mut(b.range(i)).fill(1.0);
                }
            }
            _ => {
                for &i in &indices {
                    q[i] = 1.0;
                }
            }
        }
        Ok(ActiveSet { indices, q })
    }

    /// The equally weighted subgradient `γ q∘(∂ of the pieces)`.
    pub fn unbiased_subgradient(&self, lambda: &Vector) -> Result<SubgradientSelection> {
        let active = self.active_set(lambda)?;
        let (piece_gradients, gamma) = match &self.kind {
            ClfKind::SmoothQuadratic => (lambda.clone(), 1.0),
            ClfKind::MaxSquares => (lambda.clone(), 1.0 / active.indices.len() as f64),
            ClfKind::BlockMax(b) => (b.apply(lambda), 1.0 / active.indices.len() as f64),
            ClfKind::InfNorm => (
                lambda.map(|l| if l == 0.0 { 0.0 } else { l.signum() }),
                1.0 / active.indices.len() as f64,
            ),
        };
        let direction = active.q.component_mul(&piece_gradients) * gamma;
        Ok(SubgradientSelection {
            direction,
            gamma,
            active,
        })
    }

    /// Gradients of the active pieces; `∂V(λ)` is their convex hull.
    pub fn extreme_subgradients(&self, lambda: &Vector) -> Result<Vec<Vector>> {
        let active = self.active_set(lambda)?;
        let n = lambda.len();
        let out = match &self.kind {
            ClfKind::SmoothQuadratic => alloc::vec![lambda.clone()],
            ClfKind::MaxSquares => active
                .indices
                .iter()
                .map(|&i| {
                    let mut e = Vector::zeros(n);
                    e[i] = lambda[i];
                    e
                })
                .collect(),
            ClfKind::InfNorm => active
                .indices
                .iter()
                .map(|&i| {
                    let mut e = Vector::zeros(n);
                    e[i] = lambda[i].signum();
                    e
                })
                .collect(),
            ClfKind::BlockMax(b) => active
                .indices
                .iter()
                .map(|&i| {
                    let r = b.range(i);
                    let mut e = Vector::zeros(n);
                    let piece = b.metric(i) * lambda.rows(r.start, r.len());
                    e.rows_mut(r.start, r.len()).copy_from(&piece);
                    e
                })
                .collect(),
        };
        Ok(out)
    }

    /// Whether `candidate` is a convex combination of the active piece
    /// gradients, to [`MEMBERSHIP_TOLERANCE`].
    ///
    /// Solves the least-squares system `[E; 1ᵀ] w = [candidate; 1]` and checks
    /// the residual and `w ≥ 0`. The active piece gradients of every family
    /// here have disjoint supports, so the least-squares weights are the
    /// only possible convex weights.
    pub fn subdifferential_contains(&self, lambda: &Vector, candidate: &Vector) -> Result<bool> {
        check_dim(lambda.len(), candidate.len())?;
        let extremes = self.extreme_subgradients(lambda)?;
        let n = lambda.len();
        let k = extremes.len();
        let mut system = Matrix::zeros(n + 1, k);
        for (j, e) in extremes.iter().enumerate() {
            system.view_mut((0, j), (n, 1)).copy_from(e);
            system[(n, j)] = 1.0;
        }
        let mut rhs = Vector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(candidate);
        rhs[n] = 1.0;
        let weights = system
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|_| Error::invalid("subdifferential system could not be solved"))?;
        let scale = 1.0 + candidate.amax().max(system.amax());
        let residual = (&system * &weights - &rhs).amax();
        let tol = MEMBERSHIP_TOLERANCE * scale;
        Ok(residual <= tol && weights.iter().all(|&w| w >= -MEMBERSHIP_TOLERANCE))
    }
}
