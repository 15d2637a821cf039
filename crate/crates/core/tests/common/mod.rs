#![allow(dead_code)]

use ctrlopt::clf::BlockStructure;
use ctrlopt::objectives::{make_benchmark, BenchmarkProblem, ProblemParams, Quadratic};
use ctrlopt::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Random SPD matrix `BᵀB + c I`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    b.tr_mul(&b) + Matrix::identity(n, n) * shift
}

pub fn random_quadratic(seed: u64, n: usize) -> BenchmarkProblem {
    make_benchmark("random_spd_quadratic", &ProblemParams::with_dim(n, seed)).unwrap()
}

pub fn quadratic_from(a: Matrix, center: Vector) -> Quadratic {
    Quadratic::new(a, center).unwrap()
}

/// Random partition of `n` into contiguous blocks with random SPD metrics.
pub fn random_blocks(rng: &mut ChaCha8Rng, n: usize) -> BlockStructure {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.random_range(1..=left.min(3));
        sizes.push(s);
        left -= s;
    }
    let metrics = sizes.iter().map(|&s| random_spd(rng, s, 0.5)).collect();
    BlockStructure::new(sizes, metrics).unwrap()
}

/// A vector with `k` entries of equal magnitude (and random signs) that
/// dominate the rest.
pub fn tied_vector(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vector {
    let mut v = uniform_vector(rng, n, 1.0);
    let top = 2.0 + rng.random_range(0.0..3.0);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    for &i in &idx[..k] {
        v[i] = if rng.random_bool(0.5) { top } else { -top };
    }
    v
}
