//! Fit-to-band orchestration: nuisances, moment terms, the subsampled-kernel
//! estimator, bootstrap roots, studentization and the simultaneous band.

use alloc::vec::Vec;

use crate::bootstrap::{
    build_band, critical_value, grouped_layout, grouped_roots, run_bootstrap, studentize, BootstrapMode,
    BootstrapPlan, BootstrapRoots, ConfidenceBand, OddPolicy, Studentized, DEFAULT_ALPHA, DEFAULT_REPLICATES,
};
use crate::data::{Dataset, QueryVector};
use crate::error::{Error, Result};
use crate::estimator::{solve_ratio, split_terms, ForestEstimator, KernelSums, LocalEstimateSet};
use crate::kernels::{default_r, ForestKernel, KernelKind, SplitConfig};
use crate::math;
use crate::moments::{MomentKind, MomentSpec, Terms};
use crate::nuisance::{compute_terms, fit_nuisance, FittingScheme, NuisanceConfig, NuisanceFit};
use crate::seed;

/// Default subsample proportion `b/n`.
pub const DEFAULT_BN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleSize {
    /// `b = ⌈fraction · n⌉` with `n` the estimation sample size.
    Fraction(f64),
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub moment: MomentSpec,
    pub scheme: FittingScheme,
    pub nuisance: NuisanceConfig,
    pub kernel: KernelKind,
    pub b: SubsampleSize,
    /// Total kernel count `r`; `None` uses `max(⌈(n/b)²⌉, 2000)`.
    pub trees: Option<usize>,
    /// Kernels per little-bags group; `None` uses `⌈r/B⌉`.
    pub trees_per_group: Option<usize>,
    pub replicates: usize,
    pub alpha: f64,
    pub mode: BootstrapMode,
    pub odd_policy: OddPolicy,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            moment: MomentSpec::new(MomentKind::CateAipw),
            scheme: FittingScheme::SameSample,
            nuisance: NuisanceConfig::default(),
            kernel: KernelKind::Tree(SplitConfig::default()),
            b: SubsampleSize::Fraction(DEFAULT_BN),
            trees: None,
            trees_per_group: None,
            replicates: DEFAULT_REPLICATES,
            alpha: DEFAULT_ALPHA,
            mode: BootstrapMode::HalfGrouped,
            odd_policy: OddPolicy::Lenient,
            seed: 0,
        }
    }
}

/// Tuning values after defaults and clamps are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    /// Estimation sample size.
    pub n: usize,
    pub b: usize,
    /// Kernels in the full-sample estimator.
    pub r: usize,
    /// Kernels per group in `HalfGrouped` mode.
    pub trees_per_group: Option<usize>,
    /// `b` was raised to the kernel's minimum subsample size.
    pub b_clamped: bool,
}

impl PipelineConfig {
    /// Check the configuration against an estimation sample of size `n`.
    pub fn resolve(&self, n: usize) -> Result<Resolved> {
        self.scheme.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadAlpha(self.alpha));
        }
        let needed = math::ceil_count(1.0 / self.alpha).max(2);
        if self.replicates < needed {
            return Err(Error::TooFewReplicates {
                needed,
                got: self.replicates,
            });
        }
        if let BootstrapMode::Crossfit { k } = self.mode {
            if k == 0 {
                return Err(Error::BadScheme(alloc::format!("crossfit needs k >= 1")));
            }
            if let FittingScheme::KFold { k: kf } = self.scheme {
                if kf != k {
                    return Err(Error::BadScheme(alloc::format!(
                        "crossfit({k}) bootstrap with kfold k = {kf} nuisances"
                    )));
                }
            }
        }
        let raw_b = match self.b {
            SubsampleSize::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Config(alloc::format!("b/n must lie in (0, 1], got {f}")));
                }
                math::ceil_count(f * n as f64)
            }
            SubsampleSize::Fixed(b) => b,
        };
        let min_b = self.kernel.min_subsample();
        let b = raw_b.max(min_b);
        if b > n {
            return Err(Error::BadSize { n, b });
        }
        if b != raw_b {
            log::warn!("b = {raw_b} raised to the kernel minimum {b}");
        }
        if (b as f64) < math::ln(n as f64) {
            return Err(Error::Config(alloc::format!("b = {b} is below log n for n = {n}")));
        }
        let r = self.trees.unwrap_or_else(|| default_r(n, b));
        if r == 0 {
            return Err(Error::ZeroReplicates);
        }
        let trees_per_group = match self.mode {
            BootstrapMode::HalfGrouped => {
                let t = self.trees_per_group.unwrap_or_else(|| r.div_ceil(self.replicates));
                if t == 0 {
                    return Err(Error::ZeroReplicates);
                }
                Some(t)
            }
            _ => None,
        };
        let total = trees_per_group.map_or(r, |t| t * self.replicates);
        if n as f64 > b as f64 * math::sqrt(total as f64) {
            return Err(Error::Config(alloc::format!(
                "n = {n} exceeds b·sqrt(r) = {b}·sqrt({total})"
            )));
        }
        Ok(Resolved {
            n,
            b,
            r,
            trees_per_group,
            b_clamped: b != raw_b,
        })
    }

    fn nuisance_seed(&self) -> u64 {
        seed::tagged(self.seed, b"nuisance")
    }

    fn bootstrap_seed(&self) -> u64 {
        seed::tagged(self.seed, b"bootstrap")
    }

    fn plan(&self) -> BootstrapPlan {
        BootstrapPlan {
            mode: self.mode,
            replicates: self.replicates,
            odd_policy: self.odd_policy,
            seed: self.bootstrap_seed(),
        }
    }
}

/// Nuisance fit and moment terms, shared by every later stage.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub resolved: Resolved,
    pub nuisance: NuisanceFit,
    pub terms: Vec<Terms>,
}

impl Prepared {
    pub fn universe(&self) -> &[usize] {
        &self.nuisance.estimation_sample
    }
}

pub fn prepare(data: &Dataset, config: &PipelineConfig) -> Result<Prepared> {
    // Validate the scheme before fitting anything.
    config.scheme.validate()?;
    let nuisance = fit_nuisance(data, &config.moment, config.scheme, &config.nuisance, config.nuisance_seed())?;
    let resolved = config.resolve(nuisance.estimation_sample.len())?;
    let terms = compute_terms(data, &config.moment, &nuisance)?;
    Ok(Prepared {
        resolved,
        nuisance,
        terms,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub resolved: Resolved,
    pub estimates: LocalEstimateSet,
    pub roots: BootstrapRoots,
    pub studentized: Studentized,
    pub band: ConfidenceBand,
}

fn estimator<'a>(
    data: &'a Dataset,
    prepared: &Prepared,
    queries: &QueryVector,
    config: &PipelineConfig,
) -> Result<ForestEstimator<'a>> {
    let r = prepared.resolved.trees_per_group.unwrap_or(prepared.resolved.r);
    ForestEstimator::new(data.x(), &prepared.terms, queries.clone(), config.kernel, prepared.resolved.b, r)
}

fn finish(
    resolved: Resolved,
    estimates: LocalEstimateSet,
    roots: BootstrapRoots,
    alpha: f64,
) -> Result<PipelineOutput> {
    let studentized = studentize(&roots)?;
    let cv = critical_value(&studentized.sup_stats, alpha)?;
    let band = build_band(&estimates, &studentized.lambda_hat, cv, alpha, roots.n);
    Ok(PipelineOutput {
        resolved,
        estimates,
        roots,
        studentized,
        band,
    })
}

/// Estimates and band for a prepared fit.
pub fn run_prepared(
    data: &Dataset,
    prepared: &Prepared,
    queries: &QueryVector,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let est = estimator(data, prepared, queries, config)?;
    let folds = match config.scheme {
        FittingScheme::KFold { .. } => Some(prepared.nuisance.folds.as_slice()),
        _ => None,
    };
    let folds = if matches!(config.mode, BootstrapMode::Crossfit { .. }) {
        folds
    } else {
        None
    };
    let out = run_bootstrap(&est, queries, prepared.universe(), folds, &config.plan())?;
    finish(prepared.resolved, out.estimates, out.roots, config.alpha)
}

/// Fit nuisances, estimate at `queries` and build the band.
pub fn run_pipeline(data: &Dataset, queries: &QueryVector, config: &PipelineConfig) -> Result<PipelineOutput> {
    let prepared = prepare(data, config)?;
    run_prepared(data, &prepared, queries, config)
}

/// Materialize the kernels behind the full-sample estimate.
///
/// In `HalfGrouped` mode this is the grouped forest the bootstrap uses, so
/// [`band_from_forest`] reproduces [`run_prepared`] exactly. In other modes
/// it is the forest grown on the estimation sample with the full-sample seed.
pub fn grow_fit_forest(
    data: &Dataset,
    prepared: &Prepared,
    queries: &QueryVector,
    config: &PipelineConfig,
) -> Result<ForestKernel> {
    let est = estimator(data, prepared, queries, config)?;
    match prepared.resolved.trees_per_group {
        Some(per_group) => {
            let layout = grouped_layout(prepared.universe(), config.replicates, config.odd_policy, config.bootstrap_seed())?;
            ForestKernel::grow_grouped(
                data.n(),
                data.x(),
                est.m2(),
                layout.halves,
                &layout.seeds,
                prepared.resolved.b,
                per_group,
                config.kernel,
                config.bootstrap_seed(),
            )
        }
        None => est.grow_forest(prepared.universe(), seed::tagged(config.bootstrap_seed(), b"full")),
    }
}

/// Estimates from a materialized forest.
pub fn estimates_from_forest(
    data: &Dataset,
    prepared: &Prepared,
    forest: &ForestKernel,
    queries: &QueryVector,
) -> Result<LocalEstimateSet> {
    queries.check_dim(data.q())?;
    let (m1, m2) = split_terms(&prepared.terms);
    // Grouped forests add group totals in group order, as the bootstrap does.
    let sums = match forest.group_sums(data.x(), queries, &m1, &m2) {
        Some(groups) => {
            let mut full = alloc::vec![KernelSums::default(); queries.len()];
            for g in &groups {
                for (a, b) in full.iter_mut().zip(g) {
                    a.add(b);
                }
            }
            full
        }
        None => forest.query_sums(data.x(), queries, &m1, &m2),
    };
    let support = queries
        .iter()
        .map(|x| forest.weights(data.x(), x).map_or(0, |w| w.len()))
        .collect();
    Ok(LocalEstimateSet::from_sums(queries.clone(), &sums, support))
}

/// Little-bags band from a stored grouped forest.
pub fn band_from_forest(
    data: &Dataset,
    prepared: &Prepared,
    forest: &ForestKernel,
    queries: &QueryVector,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if forest.groups().is_none() {
        return Err(Error::BadScheme(alloc::format!("stored forest has no group layout")));
    }
    let (m1, m2) = split_terms(&prepared.terms);
    let estimates = estimates_from_forest(data, prepared, forest, queries)?;
    let groups = forest
        .group_sums(data.x(), queries, &m1, &m2)
        .ok_or(Error::ZeroReplicates)?;
    let group_thetas: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| g.iter().map(|s| solve_ratio(s).map_or(f64::NAN, |(t, _)| t)).collect())
        .collect();
    let roots = BootstrapRoots {
        roots: grouped_roots(&group_thetas, &estimates.theta_hat),
        mode: BootstrapMode::HalfGrouped,
        n: prepared.universe().len(),
        theta_hat: estimates.theta_hat.clone(),
    };
    finish(prepared.resolved, estimates, roots, config.alpha)
}
