use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// `r` subsets of size `b`, subset `q` drawn from its own derived seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsamplePlan {
    pub n: usize,
    pub b: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    /// Sorted ascending.
    pub subsets: Vec<Vec<usize>>,
}

impl SubsamplePlan {
    pub fn r(&self) -> usize {
        self.subsets.len()
    }

    /// Plan from explicit subsets, e.g. when reading a stored forest.
    pub fn from_parts(n: usize, b: usize, master_seed: u64, seeds: Vec<u64>, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::ZeroReplicates);
        }
        if seeds.len() != subsets.len() {
            return Err(Error::DimensionMismatch {
                expected: subsets.len(),
                got: seeds.len(),
            });
        }
        for s in &subsets {
            if s.len() != b || s.windows(2).any(|w| w[0] >= w[1]) || s.last().is_some_and(|&i| i >= n) {
                return Err(Error::InvalidData("subsets must be sorted, distinct, of size b, within [0, n)".into()));
            }
        }
        Ok(SubsamplePlan {
            n,
            b,
            master_seed,
            seeds,
            subsets,
        })
    }
}

/// One uniform size-`b` subset of `universe`, sorted, as a pure function of `seed`.
pub fn draw_subset(universe: &[usize], b: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed::derive(seed, 0));
    let mut out: Vec<usize> = index::sample(&mut rng, universe.len(), b)
        .into_iter()
        .map(|k| universe[k])
        .collect();
    out.sort_unstable();
    out
}

pub fn draw_subsamples(n: usize, b: usize, r: usize, master_seed: u64) -> Result<SubsamplePlan> {
    let universe: Vec<usize> = (0..n).collect();
    draw_subsamples_within(n, &universe, b, r, master_seed)
}

/// Subsamples drawn inside `universe ⊆ [0, n)` (a half-sample, a fold, or an
/// estimation sample).
pub fn draw_subsamples_within(
    n: usize,
    universe: &[usize],
    b: usize,
    r: usize,
    master_seed: u64,
) -> Result<SubsamplePlan> {
    if b < 2 || b > universe.len() {
        return Err(Error::BadSize {
            n: universe.len(),
            b,
        });
    }
    if r == 0 {
        return Err(Error::ZeroReplicates);
    }
    if universe.iter().any(|&i| i >= n) {
        return Err(Error::InvalidData("subsampling universe exceeds population".into()));
    }
    let seeds: Vec<u64> = (0..r as u64).map(|q| seed::derive(master_seed, q)).collect();
    let subsets = crate::par::map_range(r, |q| draw_subset(universe, b, seeds[q]));
    Ok(SubsamplePlan {
        n,
        b,
        master_seed,
        seeds,
        subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn structural() {
        let plan = draw_subsamples(10, 3, 4, 1).unwrap();
        assert_eq!(plan.r(), 4);
        for s in &plan.subsets {
            assert_eq!(s.len(), 3);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < 10));
        }
    }

    #[test]
    fn full_subset_is_forced() {
        let plan = draw_subsamples(3, 3, 2, 7).unwrap();
        assert_eq!(plan.subsets, vec![vec![0, 1, 2], vec![0, 1, 2]]);
    }

    #[test]
    fn infeasible_sizes() {
        assert_eq!(draw_subsamples(10, 11, 1, 0), Err(Error::BadSize { n: 10, b: 11 }));
        assert_eq!(draw_subsamples(10, 1, 1, 0), Err(Error::BadSize { n: 10, b: 1 }));
        assert_eq!(draw_subsamples(10, 3, 0, 0), Err(Error::ZeroReplicates));
    }

    #[test]
    fn subset_depends_only_on_its_seed() {
        let a = draw_subsamples(50, 5, 10, 3).unwrap();
        let b = draw_subsamples(50, 5, 20, 3).unwrap();
        assert_eq!(a.subsets[..], b.subsets[..10]);
        assert_eq!(a.subsets[7], draw_subset(&(0..50).collect::<Vec<_>>(), 5, a.seeds[7]));
    }

    #[test]
    fn within_universe() {
        let universe = vec![1, 4, 9, 16, 25];
        let plan = draw_subsamples_within(30, &universe, 2, 30, 5).unwrap();
        for s in &plan.subsets {
            assert!(s.iter().all(|i| universe.contains(i)));
        }
    }
}
