use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedom_core::*;

fn instance(depth: u32, branching: u32, seed: u64) -> (Arc<MeasureTree>, CellFunction, ChaCha8Rng) {
    let tree = Arc::new(build_tree(&TreeSpec::random(depth, branching, 800, seed)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let f = CellFunction::from_fn(tree.clone(), |_| rng.random_range(-10.0..10.0)).unwrap();
    (tree, f, rng)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn differences_reconstruct_the_function(depth in 1u32..9, branching in 2u32..5, seed: u64) {
        let (tree, f, _) = instance(depth, branching, seed);
        let mut acc = vec![average(&f, tree.root()).unwrap(); tree.num_leaves()];
        for q in tree.internal_nodes() {
            let d = martingale_difference(&f, q).unwrap();
            for (a, v) in acc.iter_mut().zip(d.values()) {
                *a += v;
            }
        }
        for (a, v) in acc.iter().zip(f.values()) {
            prop_assert!(close(*a, *v, 1e-10), "{a} vs {v}");
        }
    }

    #[test]
    fn distinct_differences_are_orthogonal(depth in 1u32..7, branching in 2u32..5, seed: u64) {
        let (tree, f, _) = instance(depth, branching, seed);
        let diffs: Vec<CellFunction> = tree
            .internal_nodes()
            .map(|q| martingale_difference(&f, q).unwrap())
            .collect();
        let scale = f.l2_norm().powi(2);
        for i in 0..diffs.len() {
            for j in 0..i {
                prop_assert!(diffs[i].inner(&diffs[j]).abs() <= 1e-10 * (1.0 + scale));
            }
        }
    }

    #[test]
    fn tower_property(depth in 1u32..9, branching in 2u32..5, seed: u64, a in 0u32..9, b in 0u32..9) {
        let (tree, f, _) = instance(depth, branching, seed);
        let d = tree.depth();
        let (a, b) = (a.min(d), b.min(d));
        let nested = conditional_expectation(&conditional_expectation(&f, a).unwrap(), b).unwrap();
        let direct = conditional_expectation(&f, a.min(b)).unwrap();
        for (x, y) in nested.values().iter().zip(direct.values()) {
            prop_assert!(close(*x, *y, 1e-12), "{x} vs {y}");
        }
        prop_assert!(close(direct.integral(), f.integral(), 1e-12));
    }

    #[test]
    fn transform_contracts_l2(depth in 1u32..9, branching in 2u32..5, seed: u64) {
        let (tree, f, mut rng) = instance(depth, branching, seed);
        let eps = SignSequence::random_uniform(tree.clone(), &mut rng);
        let tf = transform(&eps, &f).unwrap();
        let centered = f.sub(&CellFunction::constant(tree.clone(), average(&f, tree.root()).unwrap())).unwrap();
        prop_assert!(tf.l2_norm() <= centered.l2_norm() * (1.0 + 1e-9));
        prop_assert!(centered.l2_norm() <= f.l2_norm() * (1.0 + 1e-9));
        let sharp = maximal_truncation(&eps, &f).unwrap();
        for (t, s) in tf.values().iter().zip(sharp.values()) {
            prop_assert!(t.abs() <= *s);
        }
    }

    #[test]
    fn sparse_operator_is_monotone(depth in 1u32..9, branching in 2u32..5, seed: u64) {
        let (tree, f, mut rng) = instance(depth, branching, seed);
        let f = f.abs();
        let g = CellFunction::from_fn(tree.clone(), |i| f.values()[i] + rng.random_range(0.0..3.0)).unwrap();
        let s = SparseCollection::new(tree.clone(), tree.nodes().filter(|_| rng.random::<f64>() < 0.3)).unwrap();
        let sf = sparse_apply(&s, &f).unwrap();
        let sg = sparse_apply(&s, &g).unwrap();
        for (x, y) in sf.values().iter().zip(sg.values()) {
            prop_assert!(x <= y);
        }
    }

    #[test]
    fn domination_certifies(depth in 1u32..10, branching in 2u32..5, seed: u64) {
        let (tree, f, mut rng) = instance(depth, branching, seed);
        let eps = SignSequence::random_signs(tree.clone(), &mut rng);
        let res = dominate(&eps, &f, tree.root()).unwrap();
        prop_assert!(check_sparse(&res.sparse).valid);
        prop_assert!(res.constant.is_finite() && res.constant > 0.0);
        let chain_bound = (tree.measure(tree.root()) / tree.leaf_measures().iter().cloned().fold(f64::INFINITY, f64::min)).log2();
        prop_assert!(res.stats.recursion_depth as f64 <= chain_bound + 1.0 + 1e-9);
        for lhs in [transform(&eps, &f).unwrap().abs(), maximal_truncation(&eps, &f).unwrap()] {
            let v = verify_domination(&lhs, &res.sparse, &f, tree.root()).unwrap();
            prop_assert!(v.ok);
            prop_assert!(v.c_needed <= res.constant * (1.0 + 1e-9));
        }
    }

    #[test]
    fn tree_spec_round_trips_through_toml(depth in 1u32..6, branching in 2u32..5, seed: u64) {
        let tree = build_tree(&TreeSpec::random(depth, branching, 200, seed)).unwrap();
        let text = tree.to_spec().to_toml_string();
        let back = build_tree(&TreeSpec::from_toml_str(&text).unwrap()).unwrap();
        prop_assert_eq!(tree, back);
    }
}
