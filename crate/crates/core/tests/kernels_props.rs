mod common;

use std::collections::BTreeMap;

use localband::data::{make_query_grid, Features};
use localband::kernels::{
    build_knn_kernel, draw_subsamples, forest_weights, grow_honest_tree, grow_tree, shrinkage_diagnostic,
    ForestKernel, KernelKind, SplitConfig, SubKernel, SubsamplePlan,
};
use localband::estimator::solve_local;
use localband::moments::Terms;
use localband::seed;
use proptest::prelude::*;
use rand::seq::SliceRandom;

use common::{regression_data, uniform_points};

fn tree_kind() -> KernelKind {
    KernelKind::Tree(SplitConfig {
        min_leaf: 2,
        ..SplitConfig::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subsets_are_distinct_and_in_range(n in 2usize..60, r in 1usize..8, s in any::<u64>(), frac in 0.0f64..1.0) {
        let b = 2 + ((n - 2) as f64 * frac) as usize;
        let plan = draw_subsamples(n, b, r, s).unwrap();
        prop_assert_eq!(plan.subsets.len(), r);
        for (q, set) in plan.subsets.iter().enumerate() {
            prop_assert_eq!(set.len(), b);
            prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(set.iter().all(|&i| i < n));
            prop_assert_eq!(plan.seeds[q], seed::derive(s, q as u64));
        }
        prop_assert_eq!(plan, draw_subsamples(n, b, r, s).unwrap());
    }

    #[test]
    fn honesty_estimation_outcomes_never_move_splits(s in any::<u64>(), shift in -5.0f64..5.0) {
        let data = regression_data(80, 3, 2, 1.0, s);
        let pseudo = data.y().to_vec();
        let subset: Vec<usize> = (0..80).step_by(2).collect();
        let config = SplitConfig { min_leaf: 2, ..SplitConfig::default() };
        let tree = grow_tree(data.x(), &pseudo, &subset, &config, s).unwrap();

        let mut permuted = pseudo.clone();
        let est = tree.estimation_half().to_vec();
        let mut values: Vec<f64> = est.iter().map(|&i| pseudo[i]).collect();
        values.shuffle(&mut seed::rng(s ^ 1));
        for (&i, v) in est.iter().zip(&values) {
            permuted[i] = *v;
        }
        let again = grow_tree(data.x(), &permuted, &subset, &config, s).unwrap();
        prop_assert_eq!(again.nodes(), tree.nodes());

        // Arbitrary changes, not only permutations.
        let mut moved = pseudo.clone();
        for &i in &est {
            moved[i] = moved[i] * 3.0 + shift;
        }
        let third = grow_tree(data.x(), &moved, &subset, &config, s).unwrap();
        prop_assert_eq!(third.nodes(), tree.nodes());
        prop_assert_eq!(third.leaves(), tree.leaves());
    }

    #[test]
    fn local_weights_normalized_and_supported(s in any::<u64>(), k in 1usize..10, qx in 0.0f64..1.0, qy in 0.0f64..1.0) {
        let data = regression_data(60, 2, 2, 1.0, s);
        let subset: Vec<usize> = draw_subsamples(60, 20, 1, s).unwrap().subsets.remove(0);
        let x = [qx, qy];
        for kind in [tree_kind(), KernelKind::Knn(k)] {
            let kernel = SubKernel::build(data.x(), data.y(), &subset, &kind, s).unwrap();
            let w = kernel.local_weights(data.x(), &x).unwrap();
            prop_assert!((w.total() - 1.0).abs() <= 1e-12);
            prop_assert!(w.weights.iter().all(|&(_, v)| v > 0.0));
            match &kernel {
                SubKernel::Tree(t) => {
                    prop_assert!(w.units().all(|i| t.estimation_half().contains(&i)));
                    let m = w.len() as f64;
                    prop_assert!(w.weights.iter().all(|&(_, v)| v == 1.0 / m));
                }
                SubKernel::Knn(_) => {
                    prop_assert!(w.units().all(|i| subset.contains(&i)));
                    prop_assert_eq!(w.len(), k);
                }
            }
        }
    }

    #[test]
    fn grid_is_row_major_without_duplicates(r1 in 1usize..6, r2 in 1usize..6, lo in -2.0f64..0.0, span in 0.1f64..3.0) {
        let g = make_query_grid(&[(lo, lo + span), (0.0, 1.0)], &[r1, r2]).unwrap();
        prop_assert_eq!(g.len(), r1 * r2);
        let pts: Vec<&[f64]> = g.iter().collect();
        for w in pts.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
    }
}

#[test]
fn forest_weights_are_the_sum_of_local_weights() {
    let data = regression_data(120, 3, 2, 1.0, 4);
    let plan = draw_subsamples(120, 30, 25, 11).unwrap();
    for kind in [tree_kind(), KernelKind::Knn(4)] {
        let forest = ForestKernel::grow(data.x(), data.y(), plan.clone(), kind).unwrap();
        for x in [[0.2, 0.7], [0.5, 0.5], [0.9, 0.1]] {
            let mut explicit: BTreeMap<usize, f64> = BTreeMap::new();
            for k in forest.kernels() {
                for (i, w) in k.local_weights(data.x(), &x).unwrap().weights {
                    *explicit.entry(i).or_default() += w;
                }
            }
            let got = forest_weights(&forest, &data, &x).unwrap();
            assert_eq!(got.len(), explicit.len());
            for (i, w) in got.weights {
                assert!((w - explicit[&i]).abs() <= 1e-12);
            }
            let total = forest.weights(data.x(), &x).unwrap().total();
            assert!((total - 25.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn single_kernel_forest_equals_its_local_weights() {
    let data = regression_data(50, 2, 2, 1.0, 2);
    let plan = draw_subsamples(50, 20, 1, 3).unwrap();
    let forest = ForestKernel::grow(data.x(), data.y(), plan, tree_kind()).unwrap();
    let x = [0.4, 0.6];
    let local = forest.kernels()[0].local_weights(data.x(), &x).unwrap();
    assert_eq!(forest_weights(&forest, &data, &x).unwrap(), local);
}

#[test]
fn duplicated_subsample_doubles_weights_and_keeps_the_solution() {
    let data = regression_data(60, 2, 2, 1.0, 8);
    let one = draw_subsamples(60, 24, 1, 5).unwrap();
    let twice = SubsamplePlan::from_parts(
        60,
        24,
        5,
        vec![one.seeds[0], one.seeds[0]],
        vec![one.subsets[0].clone(), one.subsets[0].clone()],
    )
    .unwrap();
    let f1 = ForestKernel::grow(data.x(), data.y(), one, tree_kind()).unwrap();
    let f2 = ForestKernel::grow(data.x(), data.y(), twice, tree_kind()).unwrap();
    let terms: Vec<Terms> = data.y().iter().map(|&y| Terms { m1: -1.0, m2: y }).collect();
    let x = [0.3, 0.3];
    let w1 = forest_weights(&f1, &data, &x).unwrap();
    let w2 = forest_weights(&f2, &data, &x).unwrap();
    for ((i, a), (j, b)) in w1.weights.iter().zip(&w2.weights) {
        assert_eq!(i, j);
        assert_eq!(2.0 * a, *b);
    }
    let t1 = solve_local(&w1, &terms).unwrap().0;
    let t2 = solve_local(&w2, &terms).unwrap().0;
    assert!((t1 - t2).abs() <= 1e-12);
}

#[test]
fn grow_honest_tree_matches_feature_entry_point() {
    let data = regression_data(40, 2, 1, 1.0, 1);
    let subset: Vec<usize> = (0..40).collect();
    let config = SplitConfig::default();
    let a = grow_honest_tree(&data, &subset, data.y(), &config, 9).unwrap();
    let b = grow_tree(data.x(), data.y(), &subset, &config, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.max_axis().is_none_or(|ax| ax < 1));
}

#[test]
fn knn_full_support_radius_spans_the_subsample() {
    let data = regression_data(200, 2, 2, 1.0, 3);
    let plan = draw_subsamples(200, 40, 10, 4).unwrap();
    let forest = ForestKernel::grow(data.x(), data.y(), plan.clone(), KernelKind::Knn(40)).unwrap();
    let queries = make_query_grid(&[(0.0, 1.0), (0.0, 1.0)], &[2, 2]).unwrap();
    let radius = shrinkage_diagnostic(&forest, &data, &queries).unwrap();
    for (j, x) in queries.iter().enumerate() {
        let expect: f64 = plan
            .subsets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&i| {
                        let row = data.x().row(i);
                        (row[0] - x[0]).abs().max((row[1] - x[1]).abs())
                    })
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 10.0;
        assert!((radius[j] - expect).abs() <= 1e-12);
        // Uniform data on the unit square: every corner-facing query sees most of the range.
        assert!(radius[j] > 0.6);
    }
}

#[test]
fn single_neighbor_radius_is_its_distance() {
    let data = regression_data(30, 2, 2, 1.0, 6);
    let subset: Vec<usize> = (0..30).collect();
    let knn = build_knn_kernel(&data, &subset, 1).unwrap();
    let x = [0.5, 0.5];
    let nb = knn.neighbors(data.x(), &x);
    assert_eq!(nb.len(), 1);
    let row = data.x().row(nb[0]);
    let d = (row[0] - 0.5).abs().max((row[1] - 0.5).abs());
    let plan = SubsamplePlan::from_parts(30, 30, 0, vec![0], vec![subset]).unwrap();
    let forest = ForestKernel::grow(data.x(), data.y(), plan, KernelKind::Knn(1)).unwrap();
    assert_eq!(forest.radius(data.x(), &x).unwrap(), d);
}

#[test]
fn knn_radius_shrinks_with_subsample_size() {
    let n = 400;
    let z = uniform_points(n, 2, 17);
    let features = Features::new(&z, 2);
    let pseudo = vec![0.0; n];
    let queries = make_query_grid(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
    let mean_radius = |b: usize| -> f64 {
        let mut total = 0.0;
        for s in 0..50u64 {
            let plan = draw_subsamples(n, b, 4, s).unwrap();
            let forest = ForestKernel::grow(features, &pseudo, plan, KernelKind::Knn(3)).unwrap();
            for x in queries.iter() {
                total += forest.radius(features, x).unwrap();
            }
        }
        total
    };
    let (small, mid, large) = (mean_radius(20), mean_radius(80), mean_radius(320));
    assert!(small > mid && mid > large, "{small} {mid} {large}");
}

#[cfg(feature = "std")]
#[test]
fn forests_do_not_depend_on_thread_count() {
    let data = regression_data(300, 3, 2, 1.0, 21);
    let plan = draw_subsamples(300, 30, 64, 2).unwrap();
    let grow = || ForestKernel::grow(data.x(), data.y(), plan.clone(), tree_kind()).unwrap();
    let one = common::in_pool(1, grow);
    let four = common::in_pool(4, grow);
    assert_eq!(one, four);
    let queries = make_query_grid(&[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
    for x in queries.iter() {
        assert_eq!(one.weights(data.x(), x).unwrap(), four.weights(data.x(), x).unwrap());
    }
}
