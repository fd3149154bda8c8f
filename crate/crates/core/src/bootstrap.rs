//! Bootstrap roots, studentization, critical values and simultaneous bands.
//!
//! Every replicate `l` owns the seed `derive(tagged(seed, "replicate"), l)`.
//! From it the half-sample is drawn with `derive(s_l, 0)` and any regrown
//! kernels use `derive(s_l, 1)`. Little-bag group `l` therefore lives in the
//! same half-sample that exact replicate `l` would draw.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand_distr::{Binomial, Distribution};

use crate::data::QueryVector;
use crate::error::{Error, Result};
use crate::estimator::{thetas, Accumulation, Estimator, LocalEstimateSet, QueryStatus};
use crate::math;
use crate::seed;

pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_ALPHA: f64 = 0.1;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMode {
    HalfExact,
    HalfGrouped,
    Binomial,
    Crossfit { k: usize },
}

impl BootstrapMode {
    pub fn name(&self) -> &'static str {
        match self {
            BootstrapMode::HalfExact => "half_exact",
            BootstrapMode::HalfGrouped => "half_grouped",
            BootstrapMode::Binomial => "binomial",
            BootstrapMode::Crossfit { .. } => "crossfit",
        }
    }
}

impl fmt::Display for BootstrapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BootstrapMode::Crossfit { k } => write!(f, "crossfit({k})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for BootstrapMode {
    type Err = Error;

    /// `half_exact`, `half_grouped`, `binomial`, `crossfit` (k = 2) or `crossfit(k)`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_exact" => Ok(BootstrapMode::HalfExact),
            "half_grouped" => Ok(BootstrapMode::HalfGrouped),
            "binomial" => Ok(BootstrapMode::Binomial),
            "crossfit" => Ok(BootstrapMode::Crossfit { k: 2 }),
            other => {
                if let Some(k) = other.strip_prefix("crossfit(").and_then(|r| r.strip_suffix(')')) {
                    if let Ok(k) = k.trim().parse::<usize>() {
                        if k >= 1 {
                            return Ok(BootstrapMode::Crossfit { k });
                        }
                    }
                }
                Err(Error::Config(alloc::format!("unknown bootstrap mode `{other}`")))
            }
        }
    }
}

/// What to do when a resampling universe has odd size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OddPolicy {
    Strict,
    /// Drop one seeded-random unit from the halving universe.
    #[default]
    Lenient,
}

/// `roots[l][j]` is replicate `l`'s root at query `j`; NaN where the
/// replicate estimate was empty or ill-posed.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRoots {
    pub roots: Vec<Vec<f64>>,
    pub mode: BootstrapMode,
    pub n: usize,
    pub theta_hat: Vec<f64>,
}

impl BootstrapRoots {
    pub fn replicates(&self) -> usize {
        self.roots.len()
    }

    pub fn d(&self) -> usize {
        self.theta_hat.len()
    }
}

fn replicate_seed(master: u64, l: usize) -> u64 {
    seed::derive(seed::tagged(master, b"replicate"), l as u64)
}

/// Uniform half of `universe` (size `⌊len/2⌋`), sorted.
pub fn draw_half(universe: &[usize], seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let mut h: Vec<usize> = index::sample(&mut rng, universe.len(), universe.len() / 2)
        .into_iter()
        .map(|k| universe[k])
        .collect();
    h.sort_unstable();
    h
}

/// Signs `V_i = +1` on `h`, `−1` elsewhere in `universe`, indexed by unit.
pub fn half_signs(n: usize, universe: &[usize], h: &[usize]) -> Vec<f64> {
    let mut v = alloc::vec![0.0; n];
    for &i in universe {
        v[i] = -1.0;
    }
    for &i in h {
        v[i] = 1.0;
    }
    v
}

/// Apply the odd-size policy to a resampling universe.
pub fn halving_universe(universe: &[usize], policy: OddPolicy, seed: u64) -> Result<Vec<usize>> {
    if universe.len() % 2 == 0 {
        return Ok(universe.to_vec());
    }
    match policy {
        OddPolicy::Strict => Err(Error::OddN(universe.len())),
        OddPolicy::Lenient => {
            let mut rng = seed::rng(seed::tagged(seed, b"odd-drop"));
            let drop = index::sample(&mut rng, universe.len(), 1).index(0);
            log::warn!(
                "odd resampling universe of {}: unit {} excluded from half-samples",
                universe.len(),
                universe[drop]
            );
            Ok(universe.iter().enumerate().filter(|(k, _)| *k != drop).map(|(_, &i)| i).collect())
        }
    }
}

fn difference(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect()
}

/// Fitted state shared by all replicates.
pub struct BootstrapContext<'a> {
    estimator: &'a dyn Estimator,
    universe: Vec<usize>,
    halving: Vec<usize>,
    folds: Vec<Vec<usize>>,
    fold_halving: Vec<Vec<usize>>,
    theta_n: Vec<f64>,
}

impl<'a> BootstrapContext<'a> {
    /// `theta_n` is the full-sample estimate the roots are centred at.
    pub fn new(
        estimator: &'a dyn Estimator,
        universe: Vec<usize>,
        theta_n: Vec<f64>,
        policy: OddPolicy,
        seed: u64,
    ) -> Result<Self> {
        if universe.len() < 2 {
            return Err(Error::EmptyData(universe.len()));
        }
        let halving = halving_universe(&universe, policy, seed)?;
        Ok(BootstrapContext {
            estimator,
            universe,
            halving,
            folds: Vec::new(),
            fold_halving: Vec::new(),
            theta_n,
        })
    }

    /// Attach cross-fitting folds for [`Self::crossfit_root`].
    pub fn with_folds(mut self, folds: Vec<Vec<usize>>, policy: OddPolicy, seed: u64) -> Result<Self> {
        let mut fold_halving = Vec::with_capacity(folds.len());
        for (l, f) in folds.iter().enumerate() {
            if f.len() % 2 == 1 && policy == OddPolicy::Strict {
                return Err(Error::OddFold { fold: l, size: f.len() });
            }
            fold_halving.push(halving_universe(f, OddPolicy::Lenient, seed::derive(seed, l as u64))?);
        }
        self.folds = folds;
        self.fold_halving = fold_halving;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.universe.len()
    }

    pub fn theta_n(&self) -> &[f64] {
        &self.theta_n
    }

    pub fn halving(&self) -> &[usize] {
        &self.halving
    }

    /// Exact half-sample root `θ̂_h − θ̂_n`, regrowing on `h`.
    pub fn half_sample_root(&self, replicate_seed: u64) -> Result<Vec<f64>> {
        let h = draw_half(&self.halving, seed::derive(replicate_seed, 0));
        let acc = self.estimator.accumulate(&h, seed::derive(replicate_seed, 1))?;
        Ok(difference(&thetas(&acc), &self.theta_n, 1.0))
    }

    /// Binomial-sample root `(2Q/n)(θ̂_s − θ̂_n)`.
    pub fn binomial_root(&self, replicate_seed: u64) -> Result<Vec<f64>> {
        let (s, q) = self.binomial_subset(replicate_seed)?;
        let acc = self.estimator.accumulate(&s, seed::derive(replicate_seed, 1))?;
        let n = self.universe.len() as f64;
        Ok(difference(&thetas(&acc), &self.theta_n, 2.0 * q as f64 / n))
    }

    /// The `(s, Q)` pair drawn by [`Self::binomial_root`].
    pub fn binomial_subset(&self, replicate_seed: u64) -> Result<(Vec<usize>, usize)> {
        let n = self.universe.len();
        let mut rng = seed::rng(seed::derive(replicate_seed, 0));
        let dist = Binomial::new(n as u64, 0.5).map_err(|e| Error::Config(alloc::format!("{e}")))?;
        for _ in 0..MAX_REDRAWS {
            let q = dist.sample(&mut rng) as usize;
            if q == 0 || q == n {
                continue;
            }
            let mut s: Vec<usize> = index::sample(&mut rng, n, q)
                .into_iter()
                .map(|k| self.universe[k])
                .collect();
            s.sort_unstable();
            return Ok((s, q));
        }
        Err(Error::DegenerateQ(MAX_REDRAWS))
    }

    /// Stratified cross-split root `(1/k)Σ_l θ̂_{h_l} − θ̂_r` with `h_l` a half of fold `l`.
    pub fn crossfit_root(&self, replicate_seed: u64) -> Result<Vec<f64>> {
        if self.folds.is_empty() {
            return Err(Error::BadScheme(String::from("crossfit bootstrap needs cross-fitting folds")));
        }
        let k = self.folds.len();
        let mut mean = alloc::vec![0.0; self.theta_n.len()];
        for l in 0..k {
            let s = seed::derive(replicate_seed, l as u64);
            let h = draw_half(&self.fold_halving[l], seed::derive(s, 0));
            let acc = self.estimator.accumulate(&h, seed::derive(s, 1))?;
            for (m, t) in mean.iter_mut().zip(thetas(&acc)) {
                *m += t / k as f64;
            }
        }
        Ok(difference(&mean, &self.theta_n, 1.0))
    }

    /// The half-samples of fold-stratified replicate `replicate_seed`.
    pub fn crossfit_halves(&self, replicate_seed: u64) -> Vec<Vec<usize>> {
        (0..self.folds.len())
            .map(|l| {
                let s = seed::derive(replicate_seed, l as u64);
                draw_half(&self.fold_halving[l], seed::derive(s, 0))
            })
            .collect()
    }
}

/// Full-sample estimate plus roots, as produced by [`run_bootstrap`].
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutput {
    pub estimates: LocalEstimateSet,
    pub roots: BootstrapRoots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapPlan {
    pub mode: BootstrapMode,
    pub replicates: usize,
    pub odd_policy: OddPolicy,
    pub seed: u64,
}

/// Fit on `universe` and draw `plan.replicates` roots.
///
/// `estimator` is the full estimator for `HalfExact`, `Binomial` and
/// `Crossfit`; for `HalfGrouped` it is one group's estimator (its kernel
/// count is the per-group count) and the full estimate sums all groups.
/// `folds` are required for `Crossfit` and ignored otherwise.
pub fn run_bootstrap(
    estimator: &dyn Estimator,
    queries: &QueryVector,
    universe: &[usize],
    folds: Option<&[Vec<usize>]>,
    plan: &BootstrapPlan,
) -> Result<BootstrapOutput> {
    if plan.replicates < 2 {
        return Err(Error::TooFewReplicates {
            needed: 2,
            got: plan.replicates,
        });
    }
    let full_seed = seed::tagged(plan.seed, b"full");
    let b_reps = plan.replicates;

    let (estimates, roots) = match plan.mode {
        BootstrapMode::HalfGrouped => {
            let layout = grouped_layout(universe, b_reps, plan.odd_policy, plan.seed)?;
            let groups = crate::par::map_range(b_reps, |l| estimator.accumulate(&layout.halves[l], layout.seeds[l]))
                .into_iter()
                .collect::<Result<Vec<Accumulation>>>()?;
            let mut full = Accumulation::empty(estimator.d(), estimator.n());
            for g in &groups {
                full = full.merge(g.clone());
            }
            let est = LocalEstimateSet::from_sums(queries.clone(), &full.sums, full.support_sizes());
            let group_thetas: Vec<Vec<f64>> = groups.iter().map(thetas).collect();
            (est.clone(), grouped_roots(&group_thetas, &est.theta_hat))
        }
        BootstrapMode::HalfExact | BootstrapMode::Binomial => {
            let full = estimator.accumulate(universe, full_seed)?;
            let est = LocalEstimateSet::from_sums(queries.clone(), &full.sums, full.support_sizes());
            let ctx = BootstrapContext::new(estimator, universe.to_vec(), est.theta_hat.clone(), plan.odd_policy, plan.seed)?;
            let roots = crate::par::map_range(b_reps, |l| {
                let s = replicate_seed(plan.seed, l);
                if plan.mode == BootstrapMode::Binomial {
                    ctx.binomial_root(s)
                } else {
                    ctx.half_sample_root(s)
                }
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            (est, roots)
        }
        BootstrapMode::Crossfit { k } => {
            let folds: Vec<Vec<usize>> = match folds {
                Some(f) => f.to_vec(),
                None if k == 1 => alloc::vec![universe.to_vec()],
                None => make_folds(universe, k, plan.seed),
            };
            if folds.len() != k {
                return Err(Error::BadScheme(alloc::format!(
                    "crossfit({k}) bootstrap given {} folds",
                    folds.len()
                )));
            }
            let est = crossfit_estimate(estimator, queries, &folds, full_seed)?;
            let ctx = BootstrapContext::new(estimator, universe.to_vec(), est.theta_hat.clone(), OddPolicy::Lenient, plan.seed)?
                .with_folds(folds, plan.odd_policy, plan.seed)?;
            let roots = crate::par::map_range(b_reps, |l| ctx.crossfit_root(replicate_seed(plan.seed, l)))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            (est, roots)
        }
    };

    Ok(BootstrapOutput {
        roots: BootstrapRoots {
            roots,
            mode: plan.mode,
            n: universe.len(),
            theta_hat: estimates.theta_hat.clone(),
        },
        estimates,
    })
}

/// Half-samples and kernel seeds of the little-bags groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedLayout {
    pub halves: Vec<Vec<usize>>,
    /// Group `l` grows kernel `t` with seed `derive(seeds[l], t)`.
    pub seeds: Vec<u64>,
}

/// The group layout [`run_bootstrap`] uses in `HalfGrouped` mode.
pub fn grouped_layout(universe: &[usize], replicates: usize, policy: OddPolicy, seed: u64) -> Result<GroupedLayout> {
    let halving = halving_universe(universe, policy, seed)?;
    let (halves, seeds) = (0..replicates)
        .map(|l| {
            let s = replicate_seed(seed, l);
            (draw_half(&halving, seed::derive(s, 0)), seed::derive(s, 1))
        })
        .unzip();
    Ok(GroupedLayout { halves, seeds })
}

/// Little-bags roots `θ(G_l) − θ̂_n` from per-group estimates.
pub fn grouped_roots(group_thetas: &[Vec<f64>], theta_n: &[f64]) -> Vec<Vec<f64>> {
    group_thetas.iter().map(|t| difference(t, theta_n, 1.0)).collect()
}

/// Seeded balanced partition of `universe` into `k` folds.
pub fn make_folds(universe: &[usize], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut shuffled = universe.to_vec();
    shuffled.shuffle(&mut seed::rng(seed::tagged(seed, b"folds")));
    let mut folds = alloc::vec![Vec::new(); k];
    for (pos, i) in shuffled.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    folds
}

/// Cross-fit estimate `(1/k)Σ_l θ̂_{s_l}`, each fold estimated on its own units.
pub fn crossfit_estimate(
    estimator: &dyn Estimator,
    queries: &QueryVector,
    folds: &[Vec<usize>],
    seed: u64,
) -> Result<LocalEstimateSet> {
    let k = folds.len() as f64;
    let d = estimator.d();
    let mut theta = alloc::vec![0.0; d];
    let mut den = alloc::vec![0.0; d];
    let mut support = alloc::vec![0usize; d];
    let mut statuses = alloc::vec![QueryStatus::Ok; d];
    for (l, fold) in folds.iter().enumerate() {
        let acc = estimator.accumulate(fold, seed::derive(seed, l as u64))?;
        let part = LocalEstimateSet::from_sums(queries.clone(), &acc.sums, acc.support_sizes());
        for j in 0..d {
            theta[j] += part.theta_hat[j] / k;
            den[j] += part.denominators[j] / k;
            support[j] += part.support_sizes[j];
            if !part.statuses[j].is_ok() && statuses[j].is_ok() {
                statuses[j] = part.statuses[j];
            }
        }
    }
    for j in 0..d {
        if !statuses[j].is_ok() {
            theta[j] = f64::NAN;
        }
    }
    Ok(LocalEstimateSet {
        queries: queries.clone(),
        theta_hat: theta,
        denominators: den,
        support_sizes: support,
        statuses,
    })
}

/// Per-query bootstrap scales and per-replicate sup statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Studentized {
    pub lambda_hat: Vec<f64>,
    /// `true` where `λ̂_j` was raised to the floor.
    pub floored: Vec<bool>,
    pub sup_stats: Vec<f64>,
}

/// `λ̂²_j` is the variance (denominator `B − 1`) of `√n·root[l][j]` over
/// finite replicates, floored at `1e-12·(1 + |θ̂_j|)`. Queries whose
/// full-sample estimate is not finite do not enter the sup statistic.
pub fn studentize(roots: &BootstrapRoots) -> Result<Studentized> {
    let b_reps = roots.replicates();
    if b_reps < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: b_reps });
    }
    let d = roots.d();
    let root_n = math::sqrt(roots.n as f64);
    let mut lambda_hat = Vec::with_capacity(d);
    let mut floored = Vec::with_capacity(d);
    for j in 0..d {
        let column = roots.roots.iter().map(|row| row[j] * root_n).filter(|v| v.is_finite());
        let var = math::sample_variance(column);
        let theta = roots.theta_hat[j];
        let floor = 1e-12 * (1.0 + if theta.is_finite() { math::abs(theta) } else { 0.0 });
        let lambda = math::sqrt(var);
        if lambda < floor || !lambda.is_finite() {
            lambda_hat.push(floor);
            floored.push(true);
        } else {
            lambda_hat.push(lambda);
            floored.push(false);
        }
    }
    let sup_stats = roots
        .roots
        .iter()
        .map(|row| {
            let mut sup = 0.0f64;
            for j in 0..d {
                if !roots.theta_hat[j].is_finite() {
                    continue;
                }
                let v = row[j];
                // A replicate that failed at a retained query counts as unbounded.
                let stat = if v.is_finite() {
                    root_n * math::abs(v) / lambda_hat[j]
                } else {
                    f64::INFINITY
                };
                sup = sup.max(stat);
            }
            sup
        })
        .collect();
    Ok(Studentized {
        lambda_hat,
        floored,
        sup_stats,
    })
}

/// The `⌈(1−α)B⌉`-th smallest sup statistic.
pub fn critical_value(sup_stats: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    let b_reps = sup_stats.len();
    let needed = math::ceil_count(1.0 / alpha).max(2);
    if b_reps < needed {
        return Err(Error::TooFewReplicates { needed, got: b_reps });
    }
    let k = math::ceil_count((1.0 - alpha) * b_reps as f64).clamp(1, b_reps);
    let mut sorted = sup_stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub queries: QueryVector,
    pub theta_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub statuses: Vec<QueryStatus>,
    pub cv: f64,
    pub alpha: f64,
    pub n: usize,
    /// Queries without a band because their estimate was not ok.
    pub excluded: Vec<usize>,
}

impl ConfidenceBand {
    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Whether `truth[j]` lies inside the band at every retained query.
    pub fn covers(&self, truth: &[f64]) -> bool {
        (0..self.theta_hat.len())
            .filter(|j| self.statuses[*j].is_ok())
            .all(|j| self.lower[j] <= truth[j] && truth[j] <= self.upper[j])
    }
}

/// `θ̂_j ± n^{-1/2} λ̂_j cv` at every ok query.
pub fn build_band(est: &LocalEstimateSet, lambda_hat: &[f64], cv: f64, alpha: f64, n: usize) -> ConfidenceBand {
    let scale = 1.0 / math::sqrt(n as f64);
    let d = est.d();
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut excluded = Vec::new();
    for j in 0..d {
        if est.statuses[j].is_ok() {
            let half = scale * lambda_hat[j] * cv;
            lower.push(est.theta_hat[j] - half);
            upper.push(est.theta_hat[j] + half);
        } else {
            lower.push(f64::NAN);
            upper.push(f64::NAN);
            excluded.push(j);
        }
    }
    ConfidenceBand {
        queries: est.queries.clone(),
        theta_hat: est.theta_hat.clone(),
        lambda_hat: lambda_hat.to_vec(),
        lower,
        upper,
        statuses: est.statuses.clone(),
        cv,
        alpha,
        n,
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn order_statistic_index() {
        let stats: Vec<f64> = (1..=100).rev().map(|v| v as f64).collect();
        assert_eq!(critical_value(&stats, 0.1).unwrap(), 90.0);
        assert_eq!(critical_value(&stats, 0.05).unwrap(), 95.0);
        assert!(matches!(critical_value(&stats[..5], 0.1), Err(Error::TooFewReplicates { .. })));
        assert_eq!(critical_value(&stats, 1.0), Err(Error::BadAlpha(1.0)));
    }

    #[test]
    fn band_arithmetic() {
        let q = QueryVector::new(vec![vec![0.0]]).unwrap();
        let est = LocalEstimateSet {
            queries: q,
            theta_hat: vec![1.0],
            denominators: vec![-1.0],
            support_sizes: vec![10],
            statuses: vec![QueryStatus::Ok],
        };
        let band = build_band(&est, &[2.0], 1.645, 0.1, 400);
        assert!((band.lower[0] - 0.8355).abs() < 1e-12);
        assert!((band.upper[0] - 1.1645).abs() < 1e-12);
        let flat = build_band(&est, &[2.0], 0.0, 0.1, 400);
        assert_eq!((flat.lower[0], flat.upper[0]), (1.0, 1.0));
    }

    #[test]
    fn constant_roots_hit_the_floor() {
        let roots = BootstrapRoots {
            roots: vec![vec![0.5]; 10],
            mode: BootstrapMode::HalfExact,
            n: 100,
            theta_hat: vec![2.0],
        };
        let s = studentize(&roots).unwrap();
        assert!(s.floored[0]);
        assert_eq!(s.lambda_hat[0], 3e-12);
    }

    #[test]
    fn single_query_sup_is_abs_studentized_root() {
        let roots = BootstrapRoots {
            roots: vec![vec![0.1], vec![-0.3], vec![0.2]],
            mode: BootstrapMode::HalfExact,
            n: 4,
            theta_hat: vec![0.0],
        };
        let s = studentize(&roots).unwrap();
        for (l, row) in roots.roots.iter().enumerate() {
            assert!((s.sup_stats[l] - 2.0 * row[0].abs() / s.lambda_hat[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn halves_and_signs() {
        let universe: Vec<usize> = (0..10).collect();
        let h = draw_half(&universe, 3);
        assert_eq!(h.len(), 5);
        let v = half_signs(10, &universe, &h);
        assert_eq!(v.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn odd_policy() {
        let universe: Vec<usize> = (0..7).collect();
        assert_eq!(halving_universe(&universe, OddPolicy::Strict, 0), Err(Error::OddN(7)));
        assert_eq!(halving_universe(&universe, OddPolicy::Lenient, 0).unwrap().len(), 6);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("crossfit(3)".parse::<BootstrapMode>().unwrap(), BootstrapMode::Crossfit { k: 3 });
        assert_eq!("half_grouped".parse::<BootstrapMode>().unwrap(), BootstrapMode::HalfGrouped);
        assert!("jackknife".parse::<BootstrapMode>().is_err());
    }
}
