use alloc::vec::Vec;

use super::{complete_ustat, DiscreteLaw, SymmetricKernel};
use crate::error::{Error, Result};
use crate::math;
use crate::seed;

/// `u⁽¹⁾(point) = E[u(point, D_2, …, D_b)]` by enumeration of `support^(b−1)`.
pub fn hajek_projection<A: Clone, K: SymmetricKernel<A>>(kernel: &K, law: &DiscreteLaw<A>, point: &A, budget: u128) -> Result<f64> {
    let b = kernel.order();
    if b == 0 {
        return Err(Error::BadOrder { b, n: 0 });
    }
    let mut acc = 0.0;
    law.for_each_tuple(b - 1, budget, |idx, p| {
        let mut args: Vec<&A> = Vec::with_capacity(b);
        args.push(point);
        args.extend(idx.iter().map(|&i| &law.support()[i]));
        acc += p * kernel.eval(&args);
    })?;
    Ok(acc)
}

/// `u⁽¹⁾` at every support atom.
pub fn projection_table<A: Clone, K: SymmetricKernel<A>>(kernel: &K, law: &DiscreteLaw<A>, budget: u128) -> Result<Vec<f64>> {
    law.support().iter().map(|a| hajek_projection(kernel, law, a, budget)).collect()
}

/// `σ_b² = Var(u⁽¹⁾(D))` under the law.
pub fn projection_variance<A: Clone, K: SymmetricKernel<A>>(kernel: &K, law: &DiscreteLaw<A>, budget: u128) -> Result<f64> {
    let table = projection_table(kernel, law, budget)?;
    Ok(weighted_variance(&table, law.probs()))
}

/// `ν² = Var(u(D_1, …, D_b))` under the law.
pub fn kernel_variance<A: Clone, K: SymmetricKernel<A>>(kernel: &K, law: &DiscreteLaw<A>, budget: u128) -> Result<f64> {
    let b = kernel.order();
    let (mut m1, mut m2) = (0.0, 0.0);
    law.for_each_tuple(b, budget, |idx, p| {
        let args: Vec<&A> = idx.iter().map(|&i| &law.support()[i]).collect();
        let v = kernel.eval(&args);
        m1 += p * v;
        m2 += p * v * v;
    })?;
    Ok((m2 - m1 * m1).max(0.0))
}

fn weighted_variance(values: &[f64], probs: &[f64]) -> f64 {
    let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
    values.iter().zip(probs).map(|(v, p)| p * (v - mean) * (v - mean)).sum()
}

/// Monte Carlo projection with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McProjection {
    pub estimate: f64,
    pub std_err: f64,
}

/// `u⁽¹⁾(point)` averaged over `draws` samples of `D_2, …, D_b` from `sampler`.
pub fn hajek_projection_mc<A, K, S>(kernel: &K, sampler: S, point: &A, draws: usize, seed: u64) -> Result<McProjection>
where
    K: SymmetricKernel<A>,
    S: Fn(&mut seed::Rng) -> A,
{
    if draws < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: draws });
    }
    let b = kernel.order();
    let mut rng = seed::rng(seed);
    let values: Vec<f64> = (0..draws)
        .map(|_| {
            let rest: Vec<A> = (1..b).map(|_| sampler(&mut rng)).collect();
            let mut args: Vec<&A> = Vec::with_capacity(b);
            args.push(point);
            args.extend(rest.iter());
            kernel.eval(&args)
        })
        .collect();
    let estimate = math::mean(&values);
    let var = math::sample_variance(values.iter().copied());
    Ok(McProjection {
        estimate,
        std_err: math::sqrt(var / draws as f64),
    })
}

/// `U_n − (b/n) Σ_i u⁽¹⁾(D_i)` with the projection taken under `law`.
pub fn hajek_residual<A: Clone + Sync, K: SymmetricKernel<A>>(kernel: &K, sample: &[A], law: &DiscreteLaw<A>, budget: u128) -> Result<f64> {
    if !kernel.declared_centered() {
        return Err(Error::NotCentered);
    }
    let u = complete_ustat(kernel, sample, budget)?;
    let mut proj = 0.0;
    for d in sample {
        proj += hajek_projection(kernel, law, d, budget)?;
    }
    Ok(u - hajek_term(kernel.order(), sample.len(), proj))
}

/// `(b/n)·Σ u⁽¹⁾`, written so that `b = 1` reproduces `complete_ustat` exactly.
pub(crate) fn hajek_term(b: usize, n: usize, projection_sum: f64) -> f64 {
    b as f64 * projection_sum / n as f64
}

/// `E[h(D_s) | D_1 = d]` for every atom `d`, where
/// `h(D_s) = u(D_s) − Σ_{i∈s} u⁽¹⁾(D_i)`.
pub fn residual_kernel_conditional_means<A: Clone, K: SymmetricKernel<A>>(
    kernel: &K,
    law: &DiscreteLaw<A>,
    budget: u128,
) -> Result<Vec<f64>> {
    let b = kernel.order();
    let table = projection_table(kernel, law, budget)?;
    (0..law.len())
        .map(|a| {
            let mut acc = 0.0;
            law.for_each_tuple(b - 1, budget, |idx, p| {
                let mut args: Vec<&A> = Vec::with_capacity(b);
                args.push(&law.support()[a]);
                args.extend(idx.iter().map(|&i| &law.support()[i]));
                let h = kernel.eval(&args) - table[a] - idx.iter().map(|&i| table[i]).sum::<f64>();
                acc += p * h;
            })?;
            Ok(acc)
        })
        .collect()
}

/// Hoeffding components of a kernel of order at most 3 under a finite law.
///
/// `u(D_1..D_b) = constant + Σ_i h1(D_i) + Σ_{i<j} h2(D_i, D_j) + h3(D_1, D_2, D_3)`.
/// Tables are indexed by atom indices in odometer order.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingComponents {
    pub order: usize,
    pub constant: f64,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub h3: Vec<f64>,
    /// Largest `|E[h_l(D_s)]|` over all nonempty `s ⊆ [b]`.
    pub max_abs_mean: f64,
    /// Largest `|Cov(h_{|s|}(D_s), h_{|t|}(D_t))|` over `s ≠ t`.
    pub max_abs_cross_cov: f64,
    /// Largest pointwise reconstruction error over `support^b`.
    pub max_reconstruction_error: f64,
}

impl HoeffdingComponents {
    fn term(&self, k: usize, s: &[usize], tuple: &[usize]) -> f64 {
        match s.len() {
            1 => self.h1[tuple[s[0]]],
            2 => self.h2[tuple[s[0]] * k + tuple[s[1]]],
            3 => self.h3[(tuple[s[0]] * k + tuple[s[1]]) * k + tuple[s[2]]],
            _ => 0.0,
        }
    }
}

fn nonempty_subsets(b: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << b))
        .map(|mask| (0..b).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

pub fn hoeffding_components<A: Clone, K: SymmetricKernel<A>>(kernel: &K, law: &DiscreteLaw<A>, budget: u128) -> Result<HoeffdingComponents> {
    let b = kernel.order();
    if b > 3 {
        return Err(Error::OrderTooHigh(b));
    }
    if b == 0 {
        return Err(Error::BadOrder { b, n: 0 });
    }
    let k = law.len();
    let needed = (k as u128).pow(b as u32);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let sup = law.support();
    // Full kernel table over support^b.
    let mut full = Vec::with_capacity(k.pow(b as u32));
    law.for_each_tuple(b, budget, |idx, _| {
        let args: Vec<&A> = idx.iter().map(|&i| &sup[i]).collect();
        full.push(kernel.eval(&args));
    })?;
    let at = |idx: &[usize]| idx.iter().fold(0usize, |acc, &i| acc * k + i);

    // Conditional expectations given the leading coordinates.
    let cond = |lead: &[usize]| -> f64 {
        let m = b - lead.len();
        let mut acc = 0.0;
        let mut tuple = lead.to_vec();
        tuple.resize(b, 0);
        let _ = law.for_each_tuple(m, u128::MAX, |rest, p| {
            tuple[lead.len()..].copy_from_slice(rest);
            acc += p * full[at(&tuple)];
        });
        acc
    };
    let constant = cond(&[]);
    let h1: Vec<f64> = (0..k).map(|a| cond(&[a]) - constant).collect();
    let mut h2 = Vec::new();
    if b >= 2 {
        for a in 0..k {
            for c in 0..k {
                h2.push(cond(&[a, c]) - h1[a] - h1[c] - constant);
            }
        }
    }
    let mut h3 = Vec::new();
    if b == 3 {
        for a in 0..k {
            for c in 0..k {
                for e in 0..k {
                    let v = full[at(&[a, c, e])]
                        - h2[a * k + c]
                        - h2[a * k + e]
                        - h2[c * k + e]
                        - h1[a]
                        - h1[c]
                        - h1[e]
                        - constant;
                    h3.push(v);
                }
            }
        }
    }
    let mut out = HoeffdingComponents {
        order: b,
        constant,
        h1,
        h2,
        h3,
        max_abs_mean: 0.0,
        max_abs_cross_cov: 0.0,
        max_reconstruction_error: 0.0,
    };

    let subsets = nonempty_subsets(b);
    let m = subsets.len();
    let mut means = alloc::vec![0.0; m];
    let mut cross = alloc::vec![0.0; m * m];
    let mut max_err: f64 = 0.0;
    let mut terms = alloc::vec![0.0; m];
    law.for_each_tuple(b, budget, |tuple, p| {
        let mut recon = out.constant;
        for (q, s) in subsets.iter().enumerate() {
            terms[q] = out.term(k, s, tuple);
            recon += terms[q];
        }
        max_err = max_err.max(math::abs(full[at(tuple)] - recon));
        for q in 0..m {
            means[q] += p * terms[q];
            for r in 0..m {
                cross[q * m + r] += p * terms[q] * terms[r];
            }
        }
    })?;
    out.max_abs_mean = means.iter().map(|v| math::abs(*v)).fold(0.0, f64::max);
    for q in 0..m {
        for r in 0..m {
            if q != r {
                let cov = cross[q * m + r] - means[q] * means[r];
                out.max_abs_cross_cov = out.max_abs_cross_cov.max(math::abs(cov));
            }
        }
    }
    out.max_reconstruction_error = max_err;
    Ok(out)
}
