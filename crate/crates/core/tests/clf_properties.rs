mod common;

use ctrlopt::clf::{BlockStructure, LyapunovFunction};
use ctrlopt::objectives::eval_gradient;
use ctrlopt::{Error, Vector};
use proptest::prelude::*;

fn kinds(n: usize, seed: u64) -> Vec<LyapunovFunction> {
    let mut rng = common::rng(seed);
    vec![
        LyapunovFunction::smooth_quadratic(),
        LyapunovFunction::max_squares(),
        LyapunovFunction::block_max(common::random_blocks(&mut rng, n)),
        LyapunovFunction::inf_norm(),
    ]
}

fn lambda_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..9)
}

proptest! {
    #[test]
    fn value_is_positive_off_the_origin(l in lambda_strategy(), seed in any::<u64>()) {
        let lambda = Vector::from_vec(l);
        prop_assume!(lambda.amax() > 0.0);
        for clf in kinds(lambda.len(), seed) {
            prop_assert!(clf.value(&lambda).unwrap() > 0.0, "{}", clf.kind().name());
            prop_assert_eq!(clf.value(&(&lambda * 0.0)).unwrap(), 0.0);
        }
    }

    #[test]
    fn unbiased_subgradient_is_a_subgradient(l in lambda_strategy(), seed in any::<u64>()) {
        let lambda = Vector::from_vec(l);
        prop_assume!(lambda.amax() > 0.0);
        for clf in kinds(lambda.len(), seed) {
            let sel = clf.unbiased_subgradient(&lambda).unwrap();
            prop_assert!(clf.subdifferential_contains(&lambda, &sel.direction).unwrap());
        }
    }

    #[test]
    fn tied_subgradients_are_subgradients(n in 4usize..10, k in 2usize..5, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let lambda = common::tied_vector(&mut rng, n, k);
        for clf in [LyapunovFunction::max_squares(), LyapunovFunction::inf_norm()] {
            let sel = clf.unbiased_subgradient(&lambda).unwrap();
            prop_assert_eq!(sel.active.indices.len(), k);
            prop_assert!((sel.gamma - 1.0 / k as f64).abs() == 0.0);
            prop_assert!(clf.subdifferential_contains(&lambda, &sel.direction).unwrap());
            // Doubling a single extreme weight leaves the hull.
            let biased = &sel.direction + clf.extreme_subgradients(&lambda).unwrap()[0].clone();
            prop_assert!(!clf.subdifferential_contains(&lambda, &biased).unwrap());
        }
    }

    #[test]
    fn active_set_is_scale_invariant(l in lambda_strategy(), c in 1e-3..1e3f64, seed in any::<u64>()) {
        let lambda = Vector::from_vec(l);
        prop_assume!(lambda.amax() > 0.0);
        for clf in kinds(lambda.len(), seed) {
            let a = clf.active_set(&lambda).unwrap();
            let b = clf.active_set(&(&lambda * c)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn routing_support_is_the_active_set(l in prop::collection::vec(0.1..10.0f64, 1..9), signs in any::<u16>()) {
        let lambda = Vector::from_iterator(
            l.len(),
            l.iter().enumerate().map(|(i, &x)| if signs >> (i % 16) & 1 == 1 { -x } else { x }),
        );
        for clf in [LyapunovFunction::max_squares(), LyapunovFunction::inf_norm()] {
            let active = clf.active_set(&lambda).unwrap();
            let routed = active.q.component_mul(&lambda);
            let support: Vec<usize> = (0..lambda.len()).filter(|&i| routed[i] != 0.0).collect();
            prop_assert_eq!(support, active.indices);
        }
    }

    #[test]
    fn max_squares_selects_the_largest_gradient_entry(seed in any::<u64>(), n in 2usize..12, nu0 in 0.1..10.0f64) {
        let problem = common::random_quadratic(seed, n);
        let mut rng = common::rng(seed ^ 0x5eed);
        let x = common::uniform_vector(&mut rng, n, 2.0);
        let g = eval_gradient(&problem, &x).unwrap();
        let lambda = &g * -nu0;
        let active = LyapunovFunction::max_squares().active_set(&lambda).unwrap();
        let mut by_size: Vec<f64> = g.iter().map(|c| c.abs()).collect();
        by_size.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(by_size[0] - by_size[1] > 1e-6 * by_size[0]);
        prop_assert_eq!(active.indices, vec![g.iamax()]);
    }
}

#[test]
fn zero_costate_signals_convergence() {
    for clf in kinds(3, 0) {
        assert_eq!(clf.active_set(&Vector::zeros(3)).unwrap_err(), Error::Converged);
    }
}

#[test]
fn block_scaling_moves_the_selection() {
    // Equal block energies tie; scaling one metric breaks the tie its way.
    let lambda = Vector::from_column_slice(&[1.0, 1.0, 1.0, 1.0]);
    let even = LyapunovFunction::block_max(BlockStructure::identity(vec![2, 2]).unwrap());
    assert_eq!(even.active_set(&lambda).unwrap().indices, vec![0, 1]);
    let left = BlockStructure::scaled_identity(vec![2, 2], &[3.0, 1.0]).unwrap();
    assert_eq!(LyapunovFunction::block_max(left).active_set(&lambda).unwrap().indices, vec![0]);
    let right = BlockStructure::scaled_identity(vec![2, 2], &[1.0, 3.0]).unwrap();
    assert_eq!(LyapunovFunction::block_max(right).active_set(&lambda).unwrap().indices, vec![1]);
}
