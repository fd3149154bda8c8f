mod common;

use localband::bootstrap::{
    build_band, critical_value, draw_half, half_signs, make_folds, run_bootstrap, studentize, BootstrapContext,
    BootstrapMode, BootstrapPlan, BootstrapRoots, OddPolicy,
};
use localband::data::QueryVector;
use localband::estimator::{LocalEstimateSet, MeanEstimator, QueryStatus};
use localband::error::Error;
use localband::seed;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn outcomes(n: usize, s: u64) -> Vec<f64> {
    let mut rng = seed::rng(s);
    (0..n).map(|_| 1.0 + 2.0 * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

fn one_query() -> QueryVector {
    QueryVector::new(vec![vec![0.0]]).unwrap()
}

fn plan(mode: BootstrapMode, replicates: usize, s: u64) -> BootstrapPlan {
    BootstrapPlan {
        mode,
        replicates,
        odd_policy: OddPolicy::Lenient,
        seed: s,
    }
}

fn lambda(mode: BootstrapMode, y: &[f64], replicates: usize, s: u64) -> f64 {
    let est = MeanEstimator::from_outcomes(y);
    let universe: Vec<usize> = (0..y.len()).collect();
    let out = run_bootstrap(&est, &one_query(), &universe, None, &plan(mode, replicates, s)).unwrap();
    studentize(&out.roots).unwrap().lambda_hat[0]
}

#[test]
fn half_sample_root_is_the_rademacher_sum() {
    let n = 100;
    let y = outcomes(n, 1);
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..n).collect();
    let ctx = BootstrapContext::new(&est, universe.clone(), vec![mean(&y)], OddPolicy::Strict, 0).unwrap();
    for l in 0..50u64 {
        let rep = seed::derive(77, l);
        let h = draw_half(&universe, seed::derive(rep, 0));
        let v = half_signs(n, &universe, &h);
        assert_eq!(v.iter().sum::<f64>(), 0.0);
        let linear: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let root = ctx.half_sample_root(rep).unwrap()[0];
        assert!((root - linear).abs() <= 1e-12, "replicate {l}: {root} vs {linear}");
    }
}

#[test]
fn binomial_root_is_the_independent_sign_sum() {
    let n = 100;
    let y = outcomes(n, 2);
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..n).collect();
    let ctx = BootstrapContext::new(&est, universe.clone(), vec![mean(&y)], OddPolicy::Strict, 0).unwrap();
    for l in 0..50u64 {
        let rep = seed::derive(5, l);
        let (s, q) = ctx.binomial_subset(rep).unwrap();
        assert_eq!(s.len(), q);
        let v = half_signs(n, &universe, &s);
        // Ṽ_i (Y_i − Ȳ): the centring term vanishes only when Q = n/2.
        let ybar = mean(&y);
        let linear: f64 = v.iter().zip(&y).map(|(a, b)| a * (b - ybar)).sum::<f64>() / n as f64;
        let root = ctx.binomial_root(rep).unwrap()[0];
        assert!((root - linear).abs() <= 1e-12);
        if q == n / 2 {
            let plain: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            assert!((root - plain).abs() <= 1e-12);
        }
    }
}

#[test]
fn binomial_signs_are_uncorrelated_but_half_signs_are_not() {
    let n = 20;
    let y = vec![0.0; n];
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..n).collect();
    let ctx = BootstrapContext::new(&est, universe.clone(), vec![0.0], OddPolicy::Strict, 0).unwrap();
    let reps = 5000u64;
    let corr = |draws: &[Vec<f64>], a: usize, b: usize| -> f64 {
        let m = draws.len() as f64;
        let (ma, mb) = (
            draws.iter().map(|v| v[a]).sum::<f64>() / m,
            draws.iter().map(|v| v[b]).sum::<f64>() / m,
        );
        let cov = draws.iter().map(|v| (v[a] - ma) * (v[b] - mb)).sum::<f64>() / m;
        let va = draws.iter().map(|v| (v[a] - ma).powi(2)).sum::<f64>() / m;
        let vb = draws.iter().map(|v| (v[b] - mb).powi(2)).sum::<f64>() / m;
        cov / (va * vb).sqrt()
    };
    let binomial: Vec<Vec<f64>> = (0..reps)
        .map(|l| half_signs(n, &universe, &ctx.binomial_subset(seed::derive(9, l)).unwrap().0))
        .collect();
    let halves: Vec<Vec<f64>> = (0..reps)
        .map(|l| half_signs(n, &universe, &draw_half(&universe, seed::derive(9, l))))
        .collect();
    let pairs = [(0, 1), (2, 7), (5, 19), (11, 12)];
    let mut half_mean = 0.0;
    for &(a, b) in &pairs {
        let rho = corr(&binomial, a, b);
        assert!(rho.abs() <= 0.05, "binomial pair ({a},{b}): {rho}");
        half_mean += corr(&halves, a, b) / pairs.len() as f64;
    }
    // Exchangeable half-sample signs: ρ = −1/(n−1).
    assert!((half_mean + 1.0 / 19.0).abs() <= 0.03, "{half_mean}");
}

#[test]
fn half_sample_variance_matches_the_outcome_variance() {
    let y = outcomes(500, 3);
    let l = lambda(BootstrapMode::HalfExact, &y, 2000, 4);
    let ratio = l * l / variance(&y);
    assert!((ratio - 1.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn modes_agree_on_the_sample_mean() {
    let y = outcomes(500, 6);
    let half = lambda(BootstrapMode::HalfExact, &y, 2000, 1);
    for mode in [BootstrapMode::HalfGrouped, BootstrapMode::Binomial, BootstrapMode::Crossfit { k: 2 }] {
        let other = lambda(mode, &y, 2000, 1);
        assert!((other / half - 1.0).abs() <= 0.15, "{mode}: {other} vs {half}");
    }
}

#[test]
fn crossfit_halves_are_stratified() {
    let n = 200;
    let y = outcomes(n, 8);
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..n).collect();
    let folds = make_folds(&universe, 2, 3);
    let ctx = BootstrapContext::new(&est, universe.clone(), vec![mean(&y)], OddPolicy::Strict, 0)
        .unwrap()
        .with_folds(folds.clone(), OddPolicy::Strict, 0)
        .unwrap();
    assert!(folds[0].iter().all(|i| !folds[1].contains(i)));
    assert_eq!(folds[0].len() + folds[1].len(), n);
    // θ̂_r for equal folds is the plain mean.
    let theta_r = (mean(&folds[0].iter().map(|&i| y[i]).collect::<Vec<_>>())
        + mean(&folds[1].iter().map(|&i| y[i]).collect::<Vec<_>>()))
        / 2.0;
    let ctx_r = BootstrapContext::new(&est, universe.clone(), vec![theta_r], OddPolicy::Strict, 0)
        .unwrap()
        .with_folds(folds.clone(), OddPolicy::Strict, 0)
        .unwrap();
    for l in 0..30u64 {
        let halves = ctx.crossfit_halves(l);
        let mut v = vec![-1.0; n];
        for (fold, h) in folds.iter().zip(&halves) {
            assert_eq!(h.len(), fold.len() / 2);
            assert!(h.iter().all(|i| fold.contains(i)));
            for &i in h {
                v[i] = 1.0;
            }
        }
        for fold in &folds {
            let flips = fold.iter().filter(|&&i| v[i] > 0.0).count();
            assert_eq!(flips, n / 4);
        }
        let linear: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!((ctx_r.crossfit_root(l).unwrap()[0] - linear).abs() <= 1e-12);
    }
}

#[test]
fn single_fold_crossfit_is_a_half_sample_root() {
    let n = 60;
    let y = outcomes(n, 10);
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..n).collect();
    let ctx = BootstrapContext::new(&est, universe.clone(), vec![mean(&y)], OddPolicy::Strict, 0)
        .unwrap()
        .with_folds(vec![universe.clone()], OddPolicy::Strict, 0)
        .unwrap();
    for l in 0..10u64 {
        let a = ctx.crossfit_root(l).unwrap();
        let b = ctx.half_sample_root(seed::derive(l, 0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn odd_samples_follow_the_policy() {
    let y = outcomes(101, 11);
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..101).collect();
    let strict = BootstrapPlan {
        odd_policy: OddPolicy::Strict,
        ..plan(BootstrapMode::HalfExact, 20, 0)
    };
    assert_eq!(
        run_bootstrap(&est, &one_query(), &universe, None, &strict).unwrap_err(),
        Error::OddN(101)
    );
    let out = run_bootstrap(&est, &one_query(), &universe, None, &plan(BootstrapMode::HalfExact, 20, 0)).unwrap();
    assert_eq!(out.roots.n, 101);
    assert!((out.estimates.theta_hat[0] - mean(&y)).abs() <= 1e-12);
}

#[test]
fn self_studentized_normal_median() {
    let n = 400;
    let b = 10000;
    let mut rng = seed::rng(12);
    let roots: Vec<Vec<f64>> = (0..b)
        .map(|_| vec![rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt()])
        .collect();
    let r = BootstrapRoots {
        roots,
        mode: BootstrapMode::HalfExact,
        n,
        theta_hat: vec![0.0],
    };
    let st = studentize(&r).unwrap();
    let mut sup = st.sup_stats.clone();
    sup.sort_by(f64::total_cmp);
    let median = sup[b / 2];
    assert!((median - 0.674).abs() <= 0.05, "{median}");
}

#[test]
fn critical_value_examples() {
    let sup: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(critical_value(&sup, 0.1).unwrap(), 90.0);
    assert_eq!(critical_value(&sup[..9], 0.1).unwrap_err(), Error::TooFewReplicates { needed: 10, got: 9 });
    assert!(matches!(critical_value(&sup, 1.0), Err(Error::BadAlpha(_))));
}

#[cfg(feature = "std")]
#[test]
fn roots_do_not_depend_on_thread_count() {
    let y = outcomes(300, 13);
    let est = MeanEstimator::from_outcomes(&y);
    let universe: Vec<usize> = (0..300).collect();
    for mode in [BootstrapMode::HalfExact, BootstrapMode::HalfGrouped, BootstrapMode::Binomial, BootstrapMode::Crossfit { k: 2 }] {
        let run = || run_bootstrap(&est, &one_query(), &universe, None, &plan(mode, 200, 4)).unwrap();
        assert_eq!(common::in_pool(1, run), common::in_pool(8, run));
    }
}

fn arb_roots() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..5, 20usize..60).prop_flat_map(|(d, b)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), b),
            prop::collection::vec(-3.0f64..3.0, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bands_nest_and_bracket((roots, theta) in arb_roots(), n in 10usize..1000) {
        let d = theta.len();
        let r = BootstrapRoots { roots, mode: BootstrapMode::HalfExact, n, theta_hat: theta.clone() };
        let st = studentize(&r).unwrap();
        prop_assert!(st.lambda_hat.iter().enumerate().all(|(j, &l)| l >= 1e-12 * (1.0 + theta[j].abs())));
        let est = LocalEstimateSet {
            queries: QueryVector::new((0..d).map(|j| vec![j as f64]).collect()).unwrap(),
            theta_hat: theta.clone(),
            denominators: vec![-1.0; d],
            support_sizes: vec![1; d],
            statuses: vec![QueryStatus::Ok; d],
        };
        let cv10 = critical_value(&st.sup_stats, 0.1).unwrap();
        let cv05 = critical_value(&st.sup_stats, 0.05).unwrap();
        prop_assert!(cv05 >= cv10);
        let wide = build_band(&est, &st.lambda_hat, cv05, 0.05, n);
        let narrow = build_band(&est, &st.lambda_hat, cv10, 0.1, n);
        for j in 0..d {
            prop_assert!(narrow.lower[j] <= theta[j] && theta[j] <= narrow.upper[j]);
            prop_assert!(wide.lower[j] <= narrow.lower[j] && narrow.upper[j] <= wide.upper[j]);
            let half = st.lambda_hat[j] * cv10 / (n as f64).sqrt();
            prop_assert!((narrow.upper[j] - theta[j] - half).abs() <= 1e-12 * (1.0 + half));
        }
    }

    #[test]
    fn half_draws_balance(n in 2usize..200, s in any::<u64>()) {
        let universe: Vec<usize> = (0..2 * (n / 2)).collect();
        let h = draw_half(&universe, s);
        prop_assert_eq!(h.len(), universe.len() / 2);
        let v = half_signs(universe.len(), &universe, &h);
        prop_assert_eq!(v.iter().sum::<f64>(), 0.0);
    }
}
