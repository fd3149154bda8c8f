//! Ratio solve of the weighted moment equation at each query point.
//!
//! With a linear moment, `Σ_i K(x, X_i)(m1_i θ + m2_i) = 0` has the closed
//! form `θ̂ = −Σ K m2 / Σ K m1`. Estimators report additive per-query
//! [`KernelSums`], so the same code serves full-sample fits and every
//! bootstrap replicate.

use alloc::vec::Vec;

use crate::data::{Dataset, Features, QueryVector};
use crate::error::{Error, Result};
use crate::kernels::{draw_subset, ForestKernel, KernelKind, KernelWeights, SubKernel};
use crate::moments::{MomentSpec, Terms};
use crate::nuisance::{compute_terms, NuisanceFit};
use crate::seed;

/// Relative well-posedness floor: `|Σ K m1| ≥ ILLPOSED_REL · Σ K`.
pub const ILLPOSED_REL: f64 = 1e-8;

/// `(Σ K, Σ K m1, Σ K m2)` at one query.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelSums {
    pub weight: f64,
    pub m1: f64,
    pub m2: f64,
}

impl KernelSums {
    #[inline]
    pub fn add(&mut self, other: &KernelSums) {
        self.weight += other.weight;
        self.m1 += other.m1;
        self.m2 += other.m2;
    }

    pub fn scaled(&self, c: f64) -> KernelSums {
        KernelSums {
            weight: self.weight * c,
            m1: self.m1 * c,
            m2: self.m2 * c,
        }
    }

    pub fn from_weights(weights: &KernelWeights, terms: &[Terms]) -> KernelSums {
        let mut s = KernelSums::default();
        for &(i, k) in &weights.weights {
            s.weight += k;
            s.m1 += k * terms[i].m1;
            s.m2 += k * terms[i].m2;
        }
        s
    }
}

/// `(θ̂, Σ K m1)` from accumulated sums.
pub fn solve_ratio(sums: &KernelSums) -> Result<(f64, f64)> {
    if !(sums.weight > 0.0) {
        return Err(Error::EmptySupport);
    }
    let floor = ILLPOSED_REL * sums.weight;
    if !(crate::math::abs(sums.m1) >= floor) {
        return Err(Error::IllPosed {
            denominator: sums.m1,
            floor,
        });
    }
    let theta = -sums.m2 / sums.m1;
    debug_assert!(
        crate::math::abs(sums.m1 * theta + sums.m2) <= 1e-10 * (crate::math::abs(sums.m2) + 1.0),
        "ratio does not solve the weighted moment equation"
    );
    Ok((theta, sums.m1))
}

pub fn solve_local(weights: &KernelWeights, terms: &[Terms]) -> Result<(f64, f64)> {
    if weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    solve_ratio(&KernelSums::from_weights(weights, terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStatus {
    Ok,
    EmptySupport,
    IllPosed,
}

impl QueryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QueryStatus::Ok => "ok",
            QueryStatus::EmptySupport => "empty_support",
            QueryStatus::IllPosed => "ill_posed",
        }
    }

    pub fn is_ok(&self) -> bool {
        *self == QueryStatus::Ok
    }
}

/// `θ̂` at every query with a per-query status. Non-ok queries carry NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEstimateSet {
    pub queries: QueryVector,
    pub theta_hat: Vec<f64>,
    pub denominators: Vec<f64>,
    pub support_sizes: Vec<usize>,
    pub statuses: Vec<QueryStatus>,
}

impl LocalEstimateSet {
    pub fn from_sums(queries: QueryVector, sums: &[KernelSums], support_sizes: Vec<usize>) -> Self {
        let mut theta_hat = Vec::with_capacity(sums.len());
        let mut denominators = Vec::with_capacity(sums.len());
        let mut statuses = Vec::with_capacity(sums.len());
        for s in sums {
            let (theta, den, status) = match solve_ratio(s) {
                Ok((t, d)) => (t, d, QueryStatus::Ok),
                Err(Error::IllPosed { denominator, .. }) => (f64::NAN, denominator, QueryStatus::IllPosed),
                Err(_) => (f64::NAN, 0.0, QueryStatus::EmptySupport),
            };
            theta_hat.push(theta);
            denominators.push(den);
            statuses.push(status);
        }
        LocalEstimateSet {
            queries,
            theta_hat,
            denominators,
            support_sizes,
            statuses,
        }
    }

    pub fn d(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn count(&self, status: QueryStatus) -> usize {
        self.statuses.iter().filter(|s| **s == status).count()
    }
}

/// Forest weights, then the ratio solve, at every query.
pub fn estimate_all(
    forest: &ForestKernel,
    data: &Dataset,
    moment: &MomentSpec,
    nuisance: &NuisanceFit,
    queries: &QueryVector,
) -> Result<LocalEstimateSet> {
    queries.check_dim(data.q())?;
    let terms = compute_terms(data, moment, nuisance)?;
    let (m1, m2) = split_terms(&terms);
    let sums = forest.query_sums(data.x(), queries, &m1, &m2);
    let support = crate::par::map_range(queries.len(), |j| {
        forest.weights(data.x(), queries.point(j)).map_or(0, |w| w.len())
    });
    Ok(LocalEstimateSet::from_sums(queries.clone(), &sums, support))
}

pub fn split_terms(terms: &[Terms]) -> (Vec<f64>, Vec<f64>) {
    (terms.iter().map(|t| t.m1).collect(), terms.iter().map(|t| t.m2).collect())
}

/// Dense membership set over units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSet {
    words: Vec<u64>,
}

impl UnitSet {
    pub fn new(n: usize) -> Self {
        UnitSet {
            words: alloc::vec![0; n.div_ceil(64)],
        }
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn union(&mut self, other: &UnitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }
}

/// Per-query sums plus the units that received positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulation {
    pub sums: Vec<KernelSums>,
    pub support: Vec<UnitSet>,
}

impl Accumulation {
    pub fn empty(d: usize, n: usize) -> Self {
        Accumulation {
            sums: alloc::vec![KernelSums::default(); d],
            support: (0..d).map(|_| UnitSet::new(n)).collect(),
        }
    }

    pub fn merge(mut self, other: Accumulation) -> Self {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.add(b);
        }
        for (a, b) in self.support.iter_mut().zip(&other.support) {
            a.union(b);
        }
        self
    }

    pub fn support_sizes(&self) -> Vec<usize> {
        self.support.iter().map(UnitSet::len).collect()
    }
}

/// An estimator that can be re-run on any sub-universe of the units.
pub trait Estimator: Sync {
    /// Population size (unit indices lie in `[0, n)`).
    fn n(&self) -> usize;
    /// Number of query points.
    fn d(&self) -> usize;
    /// Sums for the estimator computed on `universe` only.
    fn accumulate(&self, universe: &[usize], seed: u64) -> Result<Accumulation>;
}

/// All-mass kernel: one query, equal weight on every unit of the universe.
/// With the conditional-mean moment this is the sample mean.
#[derive(Debug, Clone)]
pub struct MeanEstimator {
    terms: Vec<Terms>,
}

impl MeanEstimator {
    pub fn new(terms: Vec<Terms>) -> Self {
        MeanEstimator { terms }
    }

    pub fn from_outcomes(y: &[f64]) -> Self {
        MeanEstimator::new(y.iter().map(|&v| Terms { m1: -1.0, m2: v }).collect())
    }
}

impl Estimator for MeanEstimator {
    fn n(&self) -> usize {
        self.terms.len()
    }

    fn d(&self) -> usize {
        1
    }

    fn accumulate(&self, universe: &[usize], _seed: u64) -> Result<Accumulation> {
        let mut acc = Accumulation::empty(1, self.terms.len());
        let s = &mut acc.sums[0];
        for &i in universe {
            s.weight += 1.0;
            s.m1 += self.terms[i].m1;
            s.m2 += self.terms[i].m2;
            acc.support[0].insert(i);
        }
        Ok(acc)
    }
}

/// Trees (or k-NN kernels) per parallel chunk. Fixed so that summation order
/// never depends on the thread count.
pub const CHUNK: usize = 16;

/// Subsampled-kernel estimator that grows, evaluates and drops kernels on
/// the fly.
#[derive(Debug, Clone)]
pub struct ForestEstimator<'a> {
    features: Features<'a>,
    m1: Vec<f64>,
    m2: Vec<f64>,
    queries: QueryVector,
    kind: KernelKind,
    b: usize,
    r: usize,
}

impl<'a> ForestEstimator<'a> {
    pub fn new(features: Features<'a>, terms: &[Terms], queries: QueryVector, kind: KernelKind, b: usize, r: usize) -> Result<Self> {
        queries.check_dim(features.dim())?;
        if r == 0 {
            return Err(Error::ZeroReplicates);
        }
        if terms.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: terms.len(),
            });
        }
        let (m1, m2) = split_terms(terms);
        Ok(ForestEstimator {
            features,
            m1,
            m2,
            queries,
            kind,
            b,
            r,
        })
    }

    pub fn queries(&self) -> &QueryVector {
        &self.queries
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    fn size_for(&self, universe: &[usize]) -> Result<usize> {
        let size = self.b.min(universe.len());
        if size < self.kind.min_subsample() || size < 2 {
            return Err(match self.kind {
                KernelKind::Tree(c) => Error::TooSmall {
                    size,
                    min_leaf: c.min_leaf,
                },
                KernelKind::Knn(k) => Error::BadK { k, size },
            });
        }
        Ok(size)
    }

    /// Add kernel `seed`'s contribution (on a subset of `universe`) into `acc`.
    fn add_kernel(&self, universe: &[usize], size: usize, seed: u64, acc: &mut Accumulation) -> Result<()> {
        let subset = draw_subset(universe, size, seed);
        let kernel = SubKernel::build(self.features, &self.m2, &subset, &self.kind, seed)?;
        for (j, x) in self.queries.iter().enumerate() {
            let s = kernel.sums(self.features, x, &self.m1, &self.m2);
            acc.sums[j].add(&s);
            match &kernel {
                SubKernel::Tree(t) => {
                    for &i in t.leaf_members(x) {
                        acc.support[j].insert(i);
                    }
                }
                SubKernel::Knn(k) => {
                    for i in k.neighbors(self.features, x) {
                        acc.support[j].insert(i);
                    }
                }
            }
        }
        Ok(())
    }

    /// Kernels `q` in `range`, seeded `derive(master, q)`, all drawn inside `universe`.
    fn accumulate_range(&self, universe: &[usize], size: usize, master: u64, range: core::ops::Range<usize>) -> Result<Accumulation> {
        let mut acc = Accumulation::empty(self.queries.len(), self.features.rows());
        for q in range {
            self.add_kernel(universe, size, seed::derive(master, q as u64), &mut acc)?;
        }
        Ok(acc)
    }

    /// Materialize the kernels that [`Estimator::accumulate`] would use.
    pub fn grow_forest(&self, universe: &[usize], seed: u64) -> Result<ForestKernel> {
        let size = self.size_for(universe)?;
        let plan = crate::kernels::draw_subsamples_within(self.features.rows(), universe, size, self.r, seed)?;
        ForestKernel::grow(self.features, &self.m2, plan, self.kind)
    }
}

impl Estimator for ForestEstimator<'_> {
    fn n(&self) -> usize {
        self.features.rows()
    }

    fn d(&self) -> usize {
        self.queries.len()
    }

    fn accumulate(&self, universe: &[usize], seed: u64) -> Result<Accumulation> {
        let size = self.size_for(universe)?;
        let d = self.queries.len();
        let n = self.features.rows();
        let parts = crate::par::map_range(self.r.div_ceil(CHUNK), |c| {
            self.accumulate_range(universe, size, seed, c * CHUNK..((c + 1) * CHUNK).min(self.r))
        });
        let mut acc = Accumulation::empty(d, n);
        for part in parts {
            acc = acc.merge(part?);
        }
        Ok(acc)
    }
}

/// `θ̂` on `universe`, NaN where the query is empty or ill-posed.
pub fn thetas(acc: &Accumulation) -> Vec<f64> {
    acc.sums
        .iter()
        .map(|s| solve_ratio(s).map_or(f64::NAN, |(t, _)| t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SplitConfig;
    use alloc::vec;
    use rand::Rng as _;

    #[test]
    fn uniform_weights_give_the_mean() {
        let terms: Vec<Terms> = [1.0, 2.0, 6.0].iter().map(|&y| Terms { m1: -1.0, m2: y }).collect();
        let w = KernelWeights {
            weights: vec![(0, 1.0 / 3.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0)],
        };
        let (theta, den) = solve_local(&w, &terms).unwrap();
        assert!((theta - 3.0).abs() < 1e-15);
        assert!((den + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_jacobian_is_ill_posed() {
        let terms = vec![Terms { m1: 0.0, m2: 1.0 }; 2];
        let w = KernelWeights {
            weights: vec![(0, 0.5), (1, 0.5)],
        };
        assert!(matches!(solve_local(&w, &terms), Err(Error::IllPosed { .. })));
        assert_eq!(solve_local(&KernelWeights::default(), &terms), Err(Error::EmptySupport));
    }

    #[test]
    fn scale_invariance() {
        let s = KernelSums {
            weight: 3.0,
            m1: -2.7,
            m2: 1.3,
        };
        let (a, _) = solve_ratio(&s).unwrap();
        let (b, _) = solve_ratio(&s.scaled(1e6)).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn streaming_matches_materialized_forest() {
        let mut rng = seed::rng(2);
        let n = 300;
        let x: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        let terms: Vec<Terms> = (0..n)
            .map(|i| Terms {
                m1: -1.0,
                m2: x[2 * i] + rng.random::<f64>(),
            })
            .collect();
        let f = Features::new(&x, 2);
        let queries = QueryVector::new(vec![vec![0.2, 0.2], vec![0.8, 0.5]]).unwrap();
        let est = ForestEstimator::new(f, &terms, queries.clone(), KernelKind::Tree(SplitConfig::default()), 40, 37).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let acc = est.accumulate(&all, 99).unwrap();
        let forest = est.grow_forest(&all, 99).unwrap();
        let (m1, m2) = split_terms(&terms);
        let direct = forest.query_sums(f, &queries, &m1, &m2);
        for j in 0..2 {
            assert!((acc.sums[j].m2 - direct[j].m2).abs() < 1e-12);
            assert!((acc.sums[j].weight - 37.0).abs() < 1e-12);
            let w = forest.weights(f, queries.point(j)).unwrap();
            assert_eq!(acc.support[j].len(), w.len());
        }
    }

    #[test]
    fn mean_estimator_is_the_sample_mean() {
        let y = [1.0, 4.0, 7.0, 10.0];
        let est = MeanEstimator::from_outcomes(&y);
        let acc = est.accumulate(&[0, 1, 2, 3], 0).unwrap();
        assert_eq!(thetas(&acc), vec![5.5]);
        let acc = est.accumulate(&[1, 3], 0).unwrap();
        assert_eq!(thetas(&acc), vec![7.0]);
    }
}
