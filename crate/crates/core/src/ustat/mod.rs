//! U-statistic laboratory.
//!
//! Projections and decompositions are computed exactly under an explicit
//! [`DiscreteLaw`], which turns the Hájek projection, the Hoeffding
//! components and the degeneracy of the residual kernel into finite sums.
//! Subsets are always visited in lexicographic order.

mod enumerate;
mod experiment;
mod hajek;
mod kernels;

pub use enumerate::{complete_ustat, for_each_subset, incomplete_ustat, permutation_representation, Draws};
pub use experiment::{residual_scaling_experiment, ScalingConfig, ScalingRow};
pub use hajek::{
    hajek_projection, hajek_projection_mc, hajek_residual, hoeffding_components, kernel_variance,
    projection_table, projection_variance, residual_kernel_conditional_means, HoeffdingComponents,
    McProjection,
};
pub use kernels::{Additive, KnnMomentKernel, MomentAtom, PairwiseInteraction, Product};

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::seed::Rng;

pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Symmetric kernel of order `b` over atoms of type `A`.
pub trait SymmetricKernel<A>: Sync {
    fn order(&self) -> usize;
    /// `args.len() == self.order()`; the result must not depend on their order.
    fn eval(&self, args: &[&A]) -> f64;
    /// Whether the kernel has mean zero under the working law.
    fn declared_centered(&self) -> bool {
        false
    }
}

/// Finite law: `probs[k]` is the mass of `support[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw<A> {
    support: Vec<A>,
    probs: Vec<f64>,
}

impl<A> DiscreteLaw<A> {
    pub fn new(support: Vec<A>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::UnsupportedLaw("support and probabilities must be nonempty and match".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::UnsupportedLaw("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if crate::math::abs(total - 1.0) > 1e-12 {
            return Err(Error::UnsupportedLaw(alloc::format!("probabilities sum to {total}")));
        }
        Ok(DiscreteLaw { support, probs })
    }

    pub fn uniform(support: Vec<A>) -> Result<Self> {
        let k = support.len();
        DiscreteLaw::new(support, alloc::vec![1.0 / k as f64; k])
    }

    pub fn support(&self) -> &[A] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Atom indices of an i.i.d. sample of size `n`.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        let dist = WeightedIndex::new(&self.probs).expect("validated probabilities");
        (0..n).map(|_| dist.sample(rng)).collect()
    }

    /// Enumerate `support^m` in odometer order (last coordinate fastest),
    /// calling `f(indices, probability)`.
    pub fn for_each_tuple<F: FnMut(&[usize], f64)>(&self, m: usize, budget: u128, mut f: F) -> Result<()> {
        let k = self.support.len();
        let needed = (k as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let mut idx = alloc::vec![0usize; m];
        loop {
            let p: f64 = idx.iter().map(|&i| self.probs[i]).product();
            f(&idx, p);
            let mut axis = m;
            loop {
                if axis == 0 {
                    return Ok(());
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < k {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

impl DiscreteLaw<f64> {
    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support.iter().zip(&self.probs).map(|(v, p)| p * (v - m) * (v - m)).sum()
    }
}
