use alloc::vec::Vec;

use super::hajek::hajek_term;
use super::{complete_ustat, kernel_variance, projection_table, DiscreteLaw, SymmetricKernel};
use crate::error::{Error, Result};
use crate::math;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub ns: Vec<usize>,
    pub bs: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub budget: u128,
}

/// One `(n, b)` cell. Residual statistics are over Monte Carlo samples;
/// `sigma_b2` and `nu2` are exact under the law.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub b: usize,
    pub reps: usize,
    pub residual_q50: f64,
    pub residual_q90: f64,
    pub residual_max: f64,
    pub residual_rms: f64,
    /// `√(b² σ_b² / n)`.
    pub hajek_scale: f64,
    /// `residual_rms / hajek_scale`.
    pub ratio: f64,
    /// Share of samples with `|residual| ≤ 0.2·|(b/n) Σ u⁽¹⁾|`.
    pub dominance_fraction: f64,
    pub sigma_b2: f64,
    pub nu2: f64,
    /// `b σ_b² ≤ 1.05 ν²`.
    pub variance_check: bool,
}

fn order_stat(sorted: &[f64], p: f64) -> f64 {
    let k = math::ceil_count(p * sorted.len() as f64).clamp(1, sorted.len());
    sorted[k - 1]
}

/// For each `(n, b)`: draw `reps` samples of size `n` from `law`, compute the
/// Hájek residual of `make_kernel(b)` by complete enumeration, and summarize.
pub fn residual_scaling_experiment<K, F>(law: &DiscreteLaw<f64>, make_kernel: F, config: &ScalingConfig) -> Result<Vec<ScalingRow>>
where
    K: SymmetricKernel<f64>,
    F: Fn(usize) -> K,
{
    if config.reps == 0 {
        return Err(Error::ZeroReplicates);
    }
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &n in &config.ns {
        for &b in &config.bs {
            let kernel = make_kernel(b);
            if kernel.order() != b {
                return Err(Error::BadOrder { b: kernel.order(), n });
            }
            if !kernel.declared_centered() {
                return Err(Error::NotCentered);
            }
            if b == 0 || b > n {
                return Err(Error::BadOrder { b, n });
            }
            let needed = math::binomial(n, b);
            if needed > config.budget {
                return Err(Error::BudgetExceeded {
                    needed,
                    budget: config.budget,
                });
            }
            let table = projection_table(&kernel, law, config.budget)?;
            let probs = law.probs();
            let mean1: f64 = table.iter().zip(probs).map(|(v, p)| v * p).sum();
            let sigma_b2: f64 = table.iter().zip(probs).map(|(v, p)| p * (v - mean1) * (v - mean1)).sum();
            let nu2 = kernel_variance(&kernel, law, config.budget)?;

            let cell_seed = seed::derive(config.seed, cell);
            cell += 1;
            let draws = crate::par::map_range(config.reps, |r| -> Result<(f64, f64)> {
                let mut rng = seed::rng(seed::derive(cell_seed, r as u64));
                let idx = law.sample_indices(n, &mut rng);
                let sample: Vec<f64> = idx.iter().map(|&i| law.support()[i]).collect();
                let u = complete_ustat(&kernel, &sample, config.budget)?;
                let proj: f64 = idx.iter().map(|&i| table[i]).sum();
                let h = hajek_term(b, n, proj);
                Ok((u - h, h))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

            let mut abs_res: Vec<f64> = draws.iter().map(|d| math::abs(d.0)).collect();
            let dominated = draws.iter().filter(|d| math::abs(d.0) <= 0.2 * math::abs(d.1)).count();
            let rms = math::sqrt(draws.iter().map(|d| d.0 * d.0).sum::<f64>() / draws.len() as f64);
            abs_res.sort_by(f64::total_cmp);
            let hajek_scale = math::sqrt(b as f64 * b as f64 * sigma_b2 / n as f64);
            rows.push(ScalingRow {
                n,
                b,
                reps: config.reps,
                residual_q50: order_stat(&abs_res, 0.5),
                residual_q90: order_stat(&abs_res, 0.9),
                residual_max: *abs_res.last().unwrap_or(&0.0),
                residual_rms: rms,
                hajek_scale,
                ratio: if hajek_scale > 0.0 { rms / hajek_scale } else { f64::NAN },
                dominance_fraction: dominated as f64 / config.reps as f64,
                sigma_b2,
                nu2,
                variance_check: b as f64 * sigma_b2 <= 1.05 * nu2,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ustat::{Additive, PairwiseInteraction, DEFAULT_BUDGET};
    use alloc::vec;

    #[test]
    fn additive_rows_have_zero_residual() {
        let law = DiscreteLaw::new(vec![-1.0, 0.25, 2.0], vec![0.3, 0.5, 0.2]).unwrap();
        let config = ScalingConfig {
            ns: vec![10],
            bs: vec![1, 2],
            reps: 20,
            seed: 1,
            budget: DEFAULT_BUDGET,
        };
        let rows = residual_scaling_experiment(&law, |b| Additive::centered(b, &law), &config).unwrap();
        assert_eq!(rows[0].residual_max, 0.0);
        assert!(rows[1].residual_max < 1e-12);
        assert!(rows.iter().all(|r| r.variance_check));
    }

    #[test]
    fn order_one_pairwise_row_is_exactly_zero() {
        let law = DiscreteLaw::new(vec![-1.0, 0.25, 2.0], vec![0.3, 0.5, 0.2]).unwrap();
        let config = ScalingConfig {
            ns: vec![12],
            bs: vec![1],
            reps: 10,
            seed: 4,
            budget: DEFAULT_BUDGET,
        };
        let rows = residual_scaling_experiment(&law, |b| PairwiseInteraction::standardized(b, &law, 0.25), &config).unwrap();
        assert_eq!(rows[0].residual_q50, 0.0);
        assert_eq!(rows[0].residual_max, 0.0);
    }
}
