//! Subsampled kernels: subsample plans, honest trees, k-NN, forest weights.
//!
//! A forest kernel follows the unnormalized decomposition
//! `K(x, X_i) = Σ_q 1{i ∈ s_q} κ_q(x, X_i)`: each subsample contributes total
//! mass one and there is no division by the number of subsamples. Everything
//! downstream solves a ratio, so this scale never matters.

mod forest;
mod knn;
mod subsample;
mod tree;

pub use forest::{
    forest_weights, shrinkage_diagnostic, ForestKernel, GroupLayout, KernelKind, KernelWeights,
    SubKernel,
};
pub use knn::{build_knn_kernel, KnnKernel};
pub use subsample::{draw_subsamples, draw_subsamples_within, draw_subset, SubsamplePlan};
pub use tree::{grow_honest_tree, grow_tree, grow_with_halves, HonestPartition, Node, SplitConfig};

/// Default subsample size `⌈0.05 n⌉`.
pub fn default_b(n: usize) -> usize {
    crate::math::ceil_count(0.05 * n as f64).max(2).min(n)
}

/// Default number of subsamples `max(⌈(n/b)²⌉, 2000)`.
pub fn default_r(n: usize, b: usize) -> usize {
    let ratio = n as f64 / b as f64;
    crate::math::ceil_count(ratio * ratio).max(2000)
}
