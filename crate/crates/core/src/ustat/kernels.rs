use alloc::vec::Vec;

use super::{DiscreteLaw, SymmetricKernel};
use crate::kernels::KnnKernel;

/// `u(D_s) = Σ_{i∈s} (D_i − shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Additive {
    pub order: usize,
    pub shift: f64,
    pub centered: bool,
}

impl Additive {
    /// Centered under `law`: `shift` is the law's mean.
    pub fn centered(order: usize, law: &DiscreteLaw<f64>) -> Self {
        Additive {
            order,
            shift: law.mean(),
            centered: true,
        }
    }
}

impl SymmetricKernel<f64> for Additive {
    fn order(&self) -> usize {
        self.order
    }

    fn eval(&self, args: &[&f64]) -> f64 {
        args.iter().map(|&&d| d - self.shift).sum()
    }

    fn declared_centered(&self) -> bool {
        self.centered
    }
}

/// `u(D_s) = Π_{i∈s} D_i`. Completely degenerate under a mean-zero law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Product {
    pub order: usize,
    pub centered: bool,
}

impl SymmetricKernel<f64> for Product {
    fn order(&self) -> usize {
        self.order
    }

    fn eval(&self, args: &[&f64]) -> f64 {
        args.iter().map(|&&d| d).product()
    }

    fn declared_centered(&self) -> bool {
        self.centered
    }
}

/// Linear part plus a damped pairwise interaction:
///
/// `u(D_s) = (1/b) Σ_i a_i + (λ/b) · mean_{i<j} a_i a_j`, `a_i = (D_i − center)/scale`.
///
/// With `center` and `scale` the law's mean and standard deviation the kernel
/// is centered, its projection is `a/b`, and the Hájek residual is the pure
/// interaction U-statistic `(λ/b)·mean_{i<j} a_i a_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseInteraction {
    pub order: usize,
    pub center: f64,
    pub scale: f64,
    pub lambda: f64,
}

impl PairwiseInteraction {
    pub const DEFAULT_LAMBDA: f64 = 0.25;

    pub fn standardized(order: usize, law: &DiscreteLaw<f64>, lambda: f64) -> Self {
        let sd = crate::math::sqrt(law.variance());
        PairwiseInteraction {
            order,
            center: law.mean(),
            scale: if sd > 0.0 { sd } else { 1.0 },
            lambda,
        }
    }
}

impl SymmetricKernel<f64> for PairwiseInteraction {
    fn order(&self) -> usize {
        self.order
    }

    fn eval(&self, args: &[&f64]) -> f64 {
        let b = args.len();
        let a: Vec<f64> = args.iter().map(|&&d| (d - self.center) / self.scale).collect();
        let linear = a.iter().sum::<f64>() / b as f64;
        if b < 2 {
            return linear;
        }
        let mut pairs = 0.0;
        for i in 0..b {
            for j in i + 1..b {
                pairs += a[i] * a[j];
            }
        }
        let n_pairs = (b * (b - 1) / 2) as f64;
        linear + self.lambda / b as f64 * pairs / n_pairs
    }

    fn declared_centered(&self) -> bool {
        true
    }
}

/// Observation for moment-wrapper kernels: conditioning vector and the
/// `m2` term of a conditional-mean moment (`m1 = −1`).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAtom {
    pub x: Vec<f64>,
    pub m2: f64,
}

/// Local moment estimate at `query` from a k-NN kernel on the arguments,
/// minus `offset`. Ties in distance are broken by `m2` so the kernel is
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnMomentKernel {
    pub order: usize,
    pub k: usize,
    pub query: Vec<f64>,
    pub offset: f64,
    pub centered: bool,
}

impl SymmetricKernel<MomentAtom> for KnnMomentKernel {
    fn order(&self) -> usize {
        self.order
    }

    fn eval(&self, args: &[&MomentAtom]) -> f64 {
        let mut sorted: Vec<&MomentAtom> = args.to_vec();
        sorted.sort_by(|a, b| {
            a.x.iter()
                .zip(&b.x)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.m2.total_cmp(&b.m2))
        });
        let flat: Vec<f64> = sorted.iter().flat_map(|a| a.x.iter().copied()).collect();
        let features = crate::data::Features::new(&flat, self.query.len());
        let kernel = KnnKernel::new((0..sorted.len()).collect(), self.k.min(sorted.len()))
            .expect("k within order");
        let nb = kernel.neighbors(features, &self.query);
        // Ratio solve with m1 = −1 reduces to the neighbor mean.
        let total: f64 = nb.iter().map(|&i| sorted[i].m2).sum();
        total / nb.len() as f64 - self.offset
    }

    fn declared_centered(&self) -> bool {
        self.centered
    }
}
