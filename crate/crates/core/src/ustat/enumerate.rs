use alloc::vec::Vec;

use super::SymmetricKernel;
use crate::error::{Error, Result};
use crate::kernels::draw_subset;
use crate::math::binomial;
use crate::seed;

fn check_order(b: usize, n: usize) -> Result<()> {
    if b == 0 || b > n {
        return Err(Error::BadOrder { b, n });
    }
    Ok(())
}

/// Visit every size-`b` subset of `[0, n)` whose first element is `first`,
/// in lexicographic order.
fn for_each_with_first<F: FnMut(&[usize])>(n: usize, b: usize, first: usize, mut f: F) {
    let mut idx: Vec<usize> = (first..first + b).collect();
    if idx.last().is_none_or(|&l| l >= n) {
        return;
    }
    loop {
        f(&idx);
        // Advance positions 1..b; position 0 stays fixed.
        let mut pos = b;
        loop {
            if pos <= 1 {
                return;
            }
            pos -= 1;
            if idx[pos] < n - b + pos {
                idx[pos] += 1;
                for q in pos + 1..b {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Every size-`b` subset of `[0, n)` in lexicographic order.
pub fn for_each_subset<F: FnMut(&[usize])>(n: usize, b: usize, mut f: F) {
    if b == 0 || b > n {
        return;
    }
    for first in 0..=n - b {
        for_each_with_first(n, b, first, &mut f);
    }
}

fn eval_on<'a, A, K: SymmetricKernel<A> + ?Sized>(kernel: &K, sample: &'a [A], idx: &[usize], args: &mut Vec<&'a A>) -> f64 {
    args.clear();
    args.extend(idx.iter().map(|&i| &sample[i]));
    kernel.eval(args)
}

/// `C(n, b)^{-1} Σ_s u(D_s)`. Partial sums are formed per first index and
/// added in index order, so the value does not depend on the thread count.
pub fn complete_ustat<A: Sync, K: SymmetricKernel<A>>(kernel: &K, sample: &[A], budget: u128) -> Result<f64> {
    let n = sample.len();
    let b = kernel.order();
    check_order(b, n)?;
    let count = binomial(n, b);
    if count > budget {
        return Err(Error::BudgetExceeded { needed: count, budget });
    }
    let partial = crate::par::map_range(n - b + 1, |first| {
        let mut s = 0.0;
        let mut buf = Vec::new();
        for_each_with_first(n, b, first, |idx| s += eval_on(kernel, sample, idx, &mut buf));
        s
    });
    Ok(partial.into_iter().sum::<f64>() / count as f64)
}

/// Subset draws for [`incomplete_ustat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draws {
    /// `r` independent uniform subsets; subset `q` uses `derive(seed, q)`.
    Random { r: usize, seed: u64 },
    /// Every subset exactly once.
    AllSubsets,
}

/// Average of the kernel over the drawn subsets.
pub fn incomplete_ustat<A: Sync, K: SymmetricKernel<A>>(kernel: &K, sample: &[A], draws: Draws, budget: u128) -> Result<f64> {
    let n = sample.len();
    let b = kernel.order();
    check_order(b, n)?;
    match draws {
        Draws::AllSubsets => complete_ustat(kernel, sample, budget),
        Draws::Random { r, seed } => {
            if r == 0 {
                return Err(Error::ZeroReplicates);
            }
            let universe: Vec<usize> = (0..n).collect();
            let chunk = 1024;
            let partial = crate::par::map_range(r.div_ceil(chunk), |c| {
                let mut s = 0.0;
                let mut buf = Vec::new();
                for q in c * chunk..((c + 1) * chunk).min(r) {
                    let idx = draw_subset(&universe, b, seed::derive(seed, q as u64));
                    s += eval_on(kernel, sample, &idx, &mut buf);
                }
                s
            });
            Ok(partial.into_iter().sum::<f64>() / r as f64)
        }
    }
}

/// `(1/n!) Σ_π (1/⌊n/b⌋) Σ_{l=1}^{⌊n/b⌋} u(D_{s_{π,l}})` with
/// `s_{π,l} = {π((l−1)b + 1), …, π(lb)}`, by enumerating all permutations.
pub fn permutation_representation<'a, A: Sync, K: SymmetricKernel<A>>(kernel: &K, sample: &'a [A], budget: u128) -> Result<f64> {
    let n = sample.len();
    let b = kernel.order();
    check_order(b, n)?;
    let blocks = n / b;
    let perms = (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX);
    let needed = perms.saturating_mul(blocks as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    // Heap's algorithm, iterative form.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = alloc::vec![0usize; n];
    let mut buf = Vec::new();
    let block_mean = |perm: &[usize], buf: &mut Vec<&'a A>| -> f64 {
        let mut s = 0.0;
        for l in 0..blocks {
            s += eval_on(kernel, sample, &perm[l * b..(l + 1) * b], buf);
        }
        s / blocks as f64
    };
    let mut total = block_mean(&perm, &mut buf);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += block_mean(&perm, &mut buf);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(total / perms as f64)
}
