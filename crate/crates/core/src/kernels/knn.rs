use alloc::vec::Vec;

use crate::data::{Dataset, Features};
use crate::error::{Error, Result};

/// k nearest subsample units in sup-norm, ties to the lower unit index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnKernel {
    subsample: Vec<usize>,
    k: usize,
}

pub fn build_knn_kernel(data: &Dataset, subsample: &[usize], k: usize) -> Result<KnnKernel> {
    KnnKernel::new(subsample.to_vec(), k).and_then(|kernel| {
        if subsample.iter().any(|&i| i >= data.n()) {
            return Err(Error::InvalidData("subsample index out of range".into()));
        }
        Ok(kernel)
    })
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| crate::math::abs(u - v))
        .fold(0.0, f64::max)
}

impl KnnKernel {
    pub fn new(mut subsample: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 || k > subsample.len() {
            return Err(Error::BadK {
                k,
                size: subsample.len(),
            });
        }
        subsample.sort_unstable();
        subsample.dedup();
        Ok(KnnKernel { subsample, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsample(&self) -> &[usize] {
        &self.subsample
    }

    /// Neighbor unit indices, nearest first.
    pub fn neighbors(&self, features: Features<'_>, x: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .subsample
            .iter()
            .map(|&i| (sup_distance(features.row(i), x), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, by);
            scored.truncate(self.k);
        }
        scored.sort_by(by);
        scored.into_iter().map(|(_, i)| i).collect()
    }
}
