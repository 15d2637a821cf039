//! Small dense helpers shared by the numerical modules.

use nalgebra::{Cholesky, Dyn};

use crate::{Error, Matrix, Result, Vector};

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn is_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Cholesky factorization that also rejects non-finite factors.
pub(crate) fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonSpdMetric);
    }
    let chol = m.clone().cholesky().ok_or(Error::NonSpdMetric)?;
    if chol.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
        Ok(chol)
    } else {
        Err(Error::NonSpdMetric)
    }
}

/// Solves `m y = b` for SPD `m`, with one step of iterative refinement.
pub(crate) fn spd_solve(chol: &Cholesky<f64, Dyn>, m: &Matrix, b: &Vector) -> Vector {
    let mut y = chol.solve(b);
    let residual = b - m * &y;
    y += chol.solve(&residual);
    y
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Angle in radians between two nonzero vectors.
pub fn angle_between(a: &Vector, b: &Vector) -> f64 {
    let cos = a.dot(b) / (a.norm() * b.norm());
    // acos is ill-conditioned near 1, so measure via the cross term instead.
    let sin = (a / a.norm() - b / b.norm() * cos).norm();
    libm::atan2(sin, cos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_of_parallel_vectors_is_zero() {
        let a = Vector::from_vec(alloc::vec![1.0, 2.0, 3.0]);
        let b = &a * 7.5;
        assert!(angle_between(&a, &b) < 1e-15);
        let c = Vector::from_vec(alloc::vec![0.0, 1.0]);
        let d = Vector::from_vec(alloc::vec![1.0, 0.0]);
        assert!((angle_between(&c, &d) - core::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((angle_between(&c, &(-&c)) - core::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(cholesky(&m).err(), Some(Error::NonSpdMetric));
        let z = Matrix::zeros(2, 2);
        assert_eq!(cholesky(&z).err(), Some(Error::NonSpdMetric));
    }
}
