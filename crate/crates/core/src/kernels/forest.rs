use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::knn::{sup_distance, KnnKernel};
use super::subsample::{draw_subset, SubsamplePlan};
use super::tree::{grow_tree, HonestPartition, SplitConfig};
use crate::data::{Dataset, Features, QueryVector};
use crate::error::{Error, Result};
use crate::estimator::{KernelSums, CHUNK};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Tree(SplitConfig),
    Knn(usize),
}

impl KernelKind {
    /// Smallest subsample this kernel can be built on.
    pub fn min_subsample(&self) -> usize {
        match self {
            KernelKind::Tree(c) => 2 * c.min_leaf.max(1),
            KernelKind::Knn(k) => (*k).max(2),
        }
    }
}

/// Sparse non-negative weights over unit indices, sorted by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelWeights {
    pub weights: Vec<(usize, f64)>,
}

impl KernelWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().map(|w| w.1).sum()
    }

    pub fn get(&self, unit: usize) -> f64 {
        self.weights
            .binary_search_by_key(&unit, |w| w.0)
            .map_or(0.0, |k| self.weights[k].1)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn units(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().map(|w| w.0)
    }
}

/// Kernel built on one subsample.
#[derive(Debug, Clone, PartialEq)]
pub enum SubKernel {
    Tree(HonestPartition),
    Knn(KnnKernel),
}

impl SubKernel {
    pub fn build(features: Features<'_>, pseudo: &[f64], subset: &[usize], kind: &KernelKind, seed: u64) -> Result<Self> {
        Ok(match kind {
            KernelKind::Tree(config) => SubKernel::Tree(grow_tree(features, pseudo, subset, config, seed)?),
            KernelKind::Knn(k) => SubKernel::Knn(KnnKernel::new(subset.to_vec(), *k)?),
        })
    }

    /// Units with positive weight at `x`, each carrying weight `1/len`.
    fn support(&self, features: Features<'_>, x: &[f64]) -> Support<'_> {
        match self {
            SubKernel::Tree(t) => Support::Borrowed(t.leaf_members(x)),
            SubKernel::Knn(k) => Support::Owned(k.neighbors(features, x)),
        }
    }

    pub fn local_weights(&self, features: Features<'_>, x: &[f64]) -> Result<KernelWeights> {
        let support = self.support(features, x);
        let units = support.as_slice();
        if units.is_empty() {
            return Err(Error::EmptySupport);
        }
        let w = 1.0 / units.len() as f64;
        let mut weights: Vec<(usize, f64)> = units.iter().map(|&i| (i, w)).collect();
        weights.sort_unstable_by_key(|p| p.0);
        Ok(KernelWeights { weights })
    }

    /// `(Σκ, Σκ m1, Σκ m2)` at `x`; all zero on empty support.
    pub fn sums(&self, features: Features<'_>, x: &[f64], m1: &[f64], m2: &[f64]) -> KernelSums {
        let support = self.support(features, x);
        let units = support.as_slice();
        if units.is_empty() {
            return KernelSums::default();
        }
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for &i in units {
            s1 += m1[i];
            s2 += m2[i];
        }
        let m = units.len() as f64;
        KernelSums {
            weight: 1.0,
            m1: s1 / m,
            m2: s2 / m,
        }
    }

    fn radius(&self, features: Features<'_>, x: &[f64]) -> Option<f64> {
        let support = self.support(features, x);
        let units = support.as_slice();
        if units.is_empty() {
            return None;
        }
        Some(units.iter().map(|&i| sup_distance(features.row(i), x)).fold(0.0, f64::max))
    }
}

enum Support<'a> {
    Borrowed(&'a [usize]),
    Owned(Vec<usize>),
}

impl Support<'_> {
    fn as_slice(&self) -> &[usize] {
        match self {
            Support::Borrowed(s) => s,
            Support::Owned(v) => v,
        }
    }
}

/// Little-bag organisation: tree `q` belongs to group `q / trees_per_group`
/// and was grown on a subsample of `halves[group]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    pub halves: Vec<Vec<usize>>,
    pub trees_per_group: usize,
}

impl GroupLayout {
    pub fn groups(&self) -> usize {
        self.halves.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestKernel {
    plan: SubsamplePlan,
    kernels: Vec<SubKernel>,
    kind: KernelKind,
    groups: Option<GroupLayout>,
}

impl ForestKernel {
    /// Build one kernel per subsample of `plan`; kernel `q` uses `plan.seeds[q]`.
    pub fn grow(features: Features<'_>, pseudo: &[f64], plan: SubsamplePlan, kind: KernelKind) -> Result<Self> {
        if plan.b < kind.min_subsample() {
            return Err(too_small(&kind, plan.b));
        }
        let kernels = crate::par::map_range(plan.r(), |q| {
            SubKernel::build(features, pseudo, &plan.subsets[q], &kind, plan.seeds[q])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(ForestKernel {
            plan,
            kernels,
            kind,
            groups: None,
        })
    }

    /// Grouped forest: `per_group` kernels inside each of `halves`, subsample
    /// size `min(b, |half|)`. Kernel `t` of group `l` uses seed
    /// `derive(group_seeds[l], t)`.
    #[allow(clippy::too_many_arguments)]
    pub fn grow_grouped(
        n: usize,
        features: Features<'_>,
        pseudo: &[f64],
        halves: Vec<Vec<usize>>,
        group_seeds: &[u64],
        b: usize,
        per_group: usize,
        kind: KernelKind,
        master: u64,
    ) -> Result<Self> {
        if halves.is_empty() || per_group == 0 {
            return Err(Error::ZeroReplicates);
        }
        if group_seeds.len() != halves.len() {
            return Err(Error::DimensionMismatch {
                expected: halves.len(),
                got: group_seeds.len(),
            });
        }
        let size = halves.iter().map(Vec::len).min().unwrap_or(0).min(b);
        if size < kind.min_subsample() || size < 2 {
            return Err(too_small(&kind, size));
        }
        let r = halves.len() * per_group;
        let seeds: Vec<u64> = (0..r)
            .map(|q| seed::derive(group_seeds[q / per_group], (q % per_group) as u64))
            .collect();
        let built = crate::par::map_range(r, |q| {
            let subset = draw_subset(&halves[q / per_group], size, seeds[q]);
            SubKernel::build(features, pseudo, &subset, &kind, seeds[q]).map(|k| (subset, k))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (subsets, kernels): (Vec<_>, Vec<_>) = built.into_iter().unzip();
        Ok(ForestKernel {
            plan: SubsamplePlan {
                n,
                b: size,
                master_seed: master,
                seeds,
                subsets,
            },
            kernels,
            kind,
            groups: Some(GroupLayout {
                halves,
                trees_per_group: per_group,
            }),
        })
    }

    /// Reassemble a stored forest.
    pub fn from_parts(
        plan: SubsamplePlan,
        kernels: Vec<SubKernel>,
        kind: KernelKind,
        groups: Option<GroupLayout>,
    ) -> Result<Self> {
        if kernels.len() != plan.r() {
            return Err(Error::DimensionMismatch {
                expected: plan.r(),
                got: kernels.len(),
            });
        }
        if let Some(g) = &groups {
            if g.trees_per_group == 0 || g.groups() * g.trees_per_group != plan.r() {
                return Err(Error::InvalidData("group layout does not match the number of kernels".into()));
            }
        }
        Ok(ForestKernel {
            plan,
            kernels,
            kind,
            groups,
        })
    }

    pub fn plan(&self) -> &SubsamplePlan {
        &self.plan
    }

    pub fn kernels(&self) -> &[SubKernel] {
        &self.kernels
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn groups(&self) -> Option<&GroupLayout> {
        self.groups.as_ref()
    }

    pub fn r(&self) -> usize {
        self.kernels.len()
    }

    /// Sum of per-kernel contributions over kernels `range`, in index order.
    /// Partial sums run over blocks of [`CHUNK`] kernels, matching the
    /// accumulation order of the forest estimator bit for bit.
    pub fn sums(
        &self,
        features: Features<'_>,
        x: &[f64],
        m1: &[f64],
        m2: &[f64],
        range: core::ops::Range<usize>,
    ) -> KernelSums {
        let mut acc = KernelSums::default();
        for block in self.kernels[range].chunks(CHUNK) {
            let mut part = KernelSums::default();
            for k in block {
                part.add(&k.sums(features, x, m1, m2));
            }
            acc.add(&part);
        }
        acc
    }

    /// Per-query sums over all kernels.
    pub fn query_sums(&self, features: Features<'_>, queries: &QueryVector, m1: &[f64], m2: &[f64]) -> Vec<KernelSums> {
        crate::par::map_range(queries.len(), |j| self.sums(features, queries.point(j), m1, m2, 0..self.r()))
    }

    /// `[group][query]` sums for a grouped forest.
    pub fn group_sums(
        &self,
        features: Features<'_>,
        queries: &QueryVector,
        m1: &[f64],
        m2: &[f64],
    ) -> Option<Vec<Vec<KernelSums>>> {
        let layout = self.groups.as_ref()?;
        let per = layout.trees_per_group;
        Some(crate::par::map_range(layout.groups(), |l| {
            queries
                .iter()
                .map(|x| self.sums(features, x, m1, m2, l * per..(l + 1) * per))
                .collect()
        }))
    }

    /// `K(x, X_i)` for every unit with positive weight.
    pub fn weights(&self, features: Features<'_>, x: &[f64]) -> Result<KernelWeights> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for k in &self.kernels {
            if let Ok(local) = k.local_weights(features, x) {
                for (i, w) in local.weights {
                    *acc.entry(i).or_insert(0.0) += w;
                }
            }
        }
        if acc.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(KernelWeights {
            weights: acc.into_iter().collect(),
        })
    }

    pub fn radius(&self, features: Features<'_>, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for k in &self.kernels {
            if let Some(r) = k.radius(features, x) {
                total += r;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptySupport);
        }
        Ok(total / count as f64)
    }
}

fn too_small(kind: &KernelKind, size: usize) -> Error {
    match kind {
        KernelKind::Tree(c) => Error::TooSmall {
            size,
            min_leaf: c.min_leaf,
        },
        KernelKind::Knn(k) => Error::BadK { k: *k, size },
    }
}

pub fn forest_weights(forest: &ForestKernel, data: &Dataset, x: &[f64]) -> Result<KernelWeights> {
    forest.weights(data.x(), x)
}

/// Per query, the mean over subsample kernels of the largest sup-norm
/// distance from the query to a positive-weight unit.
pub fn shrinkage_diagnostic(forest: &ForestKernel, data: &Dataset, queries: &QueryVector) -> Result<Vec<f64>> {
    queries.check_dim(data.q())?;
    queries.iter().map(|x| forest.radius(data.x(), x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::draw_subsamples;
    use alloc::vec;
    use rand::Rng as _;

    fn problem(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seed::rng(3);
        let x: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|i| x[2 * i] + 0.1 * rng.random::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn forest_mass_equals_r() {
        let (x, y) = problem(200);
        let f = Features::new(&x, 2);
        let plan = draw_subsamples(200, 40, 25, 1).unwrap();
        let forest = ForestKernel::grow(f, &y, plan, KernelKind::Tree(SplitConfig::default())).unwrap();
        let w = forest.weights(f, &[0.5, 0.5]).unwrap();
        assert!((w.total() - 25.0).abs() < 1e-12);
        assert!(w.weights.iter().all(|p| p.1 > 0.0));
    }

    #[test]
    fn unit_sums_match_explicit_weights() {
        let (x, y) = problem(150);
        let f = Features::new(&x, 2);
        let plan = draw_subsamples(150, 30, 12, 8).unwrap();
        for kind in [KernelKind::Tree(SplitConfig::default()), KernelKind::Knn(4)] {
            let forest = ForestKernel::grow(f, &y, plan.clone(), kind).unwrap();
            let ones = vec![-1.0; 150];
            let q = [0.3, 0.7];
            let s = forest.sums(f, &q, &ones, &y, 0..forest.r());
            let w = forest.weights(f, &q).unwrap();
            let explicit: f64 = w.weights.iter().map(|&(i, k)| k * y[i]).sum();
            assert!((s.m2 - explicit).abs() < 1e-12);
            assert!((s.weight - 12.0).abs() < 1e-12);
            assert!((s.m1 + 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_full_support_radius() {
        let (x, y) = problem(60);
        let f = Features::new(&x, 2);
        let plan = draw_subsamples(60, 60, 1, 0).unwrap();
        let forest = ForestKernel::grow(f, &y, plan, KernelKind::Knn(60)).unwrap();
        let q = [0.5, 0.5];
        let expected = (0..60).map(|i| sup_distance(f.row(i), &q)).fold(0.0, f64::max);
        assert_eq!(forest.radius(f, &q).unwrap(), expected);
    }

    #[test]
    fn grouped_kernels_stay_in_their_half() {
        let (x, y) = problem(100);
        let f = Features::new(&x, 2);
        let halves = vec![(0..50).collect(), (50..100).collect()];
        let kind = KernelKind::Tree(SplitConfig::default());
        let forest = ForestKernel::grow_grouped(100, f, &y, halves, &[5, 6], 20, 3, kind, 4).unwrap();
        assert_eq!(forest.r(), 6);
        for (q, s) in forest.plan().subsets.iter().enumerate() {
            let group = q / 3;
            assert!(s.iter().all(|&i| (i >= 50) == (group == 1)));
        }
    }
}
