//! First-stage forests for `μ0`, `μ1` and `π` under three data-usage schemes.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{Dataset, Features};
use crate::error::{Error, Result};
use crate::kernels::{draw_subset, grow_tree, HonestPartition, SplitConfig};
use crate::moments::{evaluate_terms, MomentSpec, NuisanceRole, NuisanceValues, Terms};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittingScheme {
    /// Nuisances fit on a random `fraction` of the units; the rest form the
    /// estimation sample.
    IndependentSplit { fraction: f64 },
    SameSample,
    /// Cross-fitting: fold `l`'s predictions come from a fit on the other folds.
    KFold { k: usize },
}

impl FittingScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FittingScheme::IndependentSplit { fraction } if !(fraction > 0.0 && fraction < 1.0) => Err(
                Error::BadScheme(alloc::format!("split fraction must lie in (0, 1), got {fraction}")),
            ),
            FittingScheme::KFold { k } if k < 2 => {
                Err(Error::BadScheme(alloc::format!("kfold needs k >= 2, got {k}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FittingScheme::IndependentSplit { .. } => "independent_split",
            FittingScheme::SameSample => "same_sample",
            FittingScheme::KFold { .. } => "kfold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceConfig {
    pub split: SplitConfig,
    /// Nuisance subsample size as a fraction of each training stratum.
    pub b_fraction: f64,
    /// Trees per nuisance forest; `None` uses the kernel default rule.
    pub trees: Option<usize>,
    pub known_propensity: Option<f64>,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            split: SplitConfig::default(),
            b_fraction: 0.025,
            trees: None,
            known_propensity: None,
        }
    }
}

/// Mean of `values`, exact when all values are equal.
fn stable_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut reference = None;
    let mut shift = 0.0;
    let mut count = 0usize;
    for v in values {
        let r = *reference.get_or_insert(v);
        shift += v - r;
        count += 1;
    }
    match reference {
        Some(r) => r + shift / count as f64,
        None => f64::NAN,
    }
}

/// Honest regression forest predicting by the average of leaf means.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionForest {
    Trees {
        trees: Vec<HonestPartition>,
        leaf_means: Vec<Vec<f64>>,
    },
    /// Fallback when the stratum is too small for a tree.
    Constant(f64),
}

impl RegressionForest {
    pub fn fit(
        features: Features<'_>,
        y: &[f64],
        units: &[usize],
        config: &NuisanceConfig,
        seed: u64,
    ) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::InvalidData("regression forest needs at least one unit".into()));
        }
        let min_leaf = config.split.min_leaf.max(1);
        if units.len() < 2 * min_leaf {
            log::warn!(
                "nuisance stratum of {} units is below 2*min_leaf; using its mean",
                units.len()
            );
            return Ok(RegressionForest::Constant(stable_mean(units.iter().map(|&i| y[i]))));
        }
        let b = crate::math::ceil_count(config.b_fraction * units.len() as f64)
            .max(2 * min_leaf)
            .min(units.len());
        let r = config.trees.unwrap_or_else(|| crate::kernels::default_r(units.len(), b)).max(1);
        let grown = crate::par::map_range(r, |q| {
            let s = seed::derive(seed, q as u64);
            let subset = draw_subset(units, b, s);
            grow_tree(features, y, &subset, &config.split, s).map(|t| {
                let means = t.leaves().iter().map(|m| stable_mean(m.iter().map(|&i| y[i]))).collect();
                (t, means)
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (trees, leaf_means) = grown.into_iter().unzip();
        Ok(RegressionForest::Trees { trees, leaf_means })
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        match self {
            RegressionForest::Constant(c) => *c,
            RegressionForest::Trees { trees, leaf_means } => {
                stable_mean(trees.iter().zip(leaf_means).map(|(t, m)| m[t.leaf_of(z)]))
            }
        }
    }
}

/// Models trained without one fold (or on the whole nuisance sample).
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModels {
    pub mu0: Option<RegressionForest>,
    pub mu1: Option<RegressionForest>,
    pub pi: Option<RegressionForest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceFit {
    pub scheme: FittingScheme,
    pub moment: MomentSpec,
    pub models: Vec<FoldModels>,
    /// Index into `models` used to predict for each unit.
    pub fold_of: Vec<usize>,
    /// Units the main estimator may use.
    pub estimation_sample: Vec<usize>,
    /// Units of each fold under `KFold`; empty otherwise.
    pub folds: Vec<Vec<usize>>,
    pub known_propensity: Option<f64>,
}

pub enum Unit<'a> {
    Index(usize),
    Fresh(&'a [f64]),
}

fn fit_models(
    data: &Dataset,
    moment: &MomentSpec,
    train: &[usize],
    config: &NuisanceConfig,
    seed: u64,
) -> Result<FoldModels> {
    if moment.required_nuisances().is_empty() {
        return Ok(FoldModels {
            mu0: None,
            mu1: None,
            pi: None,
        });
    }
    let w = data.w().ok_or(Error::MissingTreatment)?;
    let z = data.z();
    let arm = |a: u8| -> Vec<usize> { train.iter().copied().filter(|&i| w[i] == a).collect() };
    let mut models = FoldModels {
        mu0: None,
        mu1: None,
        pi: None,
    };
    for role in moment.required_nuisances() {
        match role {
            NuisanceRole::Mu0 | NuisanceRole::Mu1 => {
                let a = u8::from(*role == NuisanceRole::Mu1);
                let units = arm(a);
                if units.is_empty() {
                    return Err(Error::EmptyArm { arm: a });
                }
                let tag: &[u8] = if a == 1 { b"mu1" } else { b"mu0" };
                let f = RegressionForest::fit(z, data.y(), &units, config, seed::tagged(seed, tag))?;
                if a == 1 {
                    models.mu1 = Some(f);
                } else {
                    models.mu0 = Some(f);
                }
            }
            NuisanceRole::Pi => {
                if config.known_propensity.is_none() {
                    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
                    models.pi = Some(RegressionForest::fit(z, &wf, train, config, seed::tagged(seed, b"pi"))?);
                }
            }
        }
    }
    Ok(models)
}

pub fn fit_nuisance(
    data: &Dataset,
    moment: &MomentSpec,
    scheme: FittingScheme,
    config: &NuisanceConfig,
    seed: u64,
) -> Result<NuisanceFit> {
    scheme.validate()?;
    if let Some(p) = config.known_propensity {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(alloc::format!("known propensity must lie in (0, 1), got {p}")));
        }
    }
    if moment.needs_treatment() {
        let w = data.w().ok_or(Error::MissingTreatment)?;
        for a in [0u8, 1] {
            if !w.contains(&a) {
                return Err(Error::EmptyArm { arm: a });
            }
        }
    }
    let n = data.n();
    let all: Vec<usize> = (0..n).collect();
    let mut shuffled = all.clone();
    shuffled.shuffle(&mut seed::rng(seed::tagged(seed, b"nuisance-partition")));

    let (models, fold_of, estimation_sample, folds) = match scheme {
        FittingScheme::SameSample => {
            if !moment.required_nuisances().is_empty() {
                log::warn!("same_sample: nuisances are fit on the data used for estimation");
            }
            let m = fit_models(data, moment, &all, config, seed::derive(seed, 0))?;
            (alloc::vec![m], alloc::vec![0; n], all, Vec::new())
        }
        FittingScheme::IndependentSplit { fraction } => {
            let n_nuis = crate::math::ceil_count(fraction * n as f64).clamp(1, n - 1);
            let mut held = shuffled[..n_nuis].to_vec();
            let mut est = shuffled[n_nuis..].to_vec();
            held.sort_unstable();
            est.sort_unstable();
            let m = fit_models(data, moment, &held, config, seed::derive(seed, 0))?;
            (alloc::vec![m], alloc::vec![0; n], est, Vec::new())
        }
        FittingScheme::KFold { k } => {
            if k > n {
                return Err(Error::BadScheme(alloc::format!("kfold k = {k} exceeds n = {n}")));
            }
            let mut fold_of = alloc::vec![0usize; n];
            let mut folds: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
            for (pos, &i) in shuffled.iter().enumerate() {
                fold_of[i] = pos % k;
                folds[pos % k].push(i);
            }
            for f in folds.iter_mut() {
                f.sort_unstable();
            }
            let models = crate::par::map_range(k, |l| {
                let train: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] != l).collect();
                fit_models(data, moment, &train, config, seed::derive(seed, l as u64))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            (models, fold_of, all, folds)
        }
    };

    Ok(NuisanceFit {
        scheme,
        moment: *moment,
        models,
        fold_of,
        estimation_sample,
        folds,
        known_propensity: config.known_propensity,
    })
}

impl NuisanceFit {
    fn values(&self, models: &FoldModels, z: &[f64]) -> Result<NuisanceValues> {
        let mu0 = models.mu0.as_ref().ok_or(Error::MissingNuisance)?.predict(z);
        let mu1 = models.mu1.as_ref().ok_or(Error::MissingNuisance)?.predict(z);
        let pi = match (self.known_propensity, &models.pi) {
            (Some(p), _) => p,
            (None, Some(f)) => f.predict(z),
            (None, None) => return Err(Error::MissingNuisance),
        };
        Ok(NuisanceValues::new(mu0, mu1, pi, self.moment.pi_clip))
    }

    /// Clipped `(μ0, μ1, π)` for a unit of `data` or for a fresh covariate vector.
    pub fn predict(&self, data: &Dataset, unit: Unit<'_>) -> Result<NuisanceValues> {
        match unit {
            Unit::Index(i) => self.values(&self.models[self.fold_of[i]], data.z().row(i)),
            Unit::Fresh(z) => {
                if matches!(self.scheme, FittingScheme::KFold { .. }) {
                    log::warn!("fresh point under kfold: using the fold-0 fit");
                }
                self.values(&self.models[0], z)
            }
        }
    }
}

pub fn predict(fit: &NuisanceFit, data: &Dataset, unit: Unit<'_>) -> Result<NuisanceValues> {
    fit.predict(data, unit)
}

/// Moment terms for every unit, with nuisances routed through `fit`.
pub fn compute_terms(data: &Dataset, moment: &MomentSpec, fit: &NuisanceFit) -> Result<Vec<Terms>> {
    let needs = !moment.required_nuisances().is_empty();
    crate::par::map_range(data.n(), |i| {
        let g = if needs {
            Some(fit.predict(data, Unit::Index(i))?)
        } else {
            None
        };
        evaluate_terms(moment, &data.observation(i), g.as_ref())
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;
    use crate::moments::MomentKind;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::Rng as _;

    fn dataset(n: usize, seed_: u64, constant: Option<f64>) -> Dataset {
        let mut rng = seed::rng(seed_);
        let z: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let w: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| constant.unwrap_or(z[2 * i] + 0.1 * rng.random::<f64>())).collect();
        let schema = Schema::new("y", Some("w".to_string()), vec!["z1".to_string(), "z2".to_string()], vec![0]).unwrap();
        Dataset::new(schema, y, Some(w), z).unwrap()
    }

    fn small_config() -> NuisanceConfig {
        NuisanceConfig {
            trees: Some(50),
            b_fraction: 0.2,
            ..NuisanceConfig::default()
        }
    }

    #[test]
    fn known_propensity_passthrough() {
        let data = dataset(200, 1, None);
        let config = NuisanceConfig {
            known_propensity: Some(0.5),
            ..small_config()
        };
        let spec = MomentSpec::new(MomentKind::CateAipw);
        let fit = fit_nuisance(&data, &spec, FittingScheme::SameSample, &config, 3).unwrap();
        for i in 0..200 {
            assert_eq!(fit.predict(&data, Unit::Index(i)).unwrap().pi, 0.5);
        }
    }

    #[test]
    fn constant_outcome_is_exact() {
        let data = dataset(200, 2, Some(0.1));
        let spec = MomentSpec::new(MomentKind::CateAipw);
        let fit = fit_nuisance(&data, &spec, FittingScheme::SameSample, &small_config(), 3).unwrap();
        let g = fit.predict(&data, Unit::Index(17)).unwrap();
        assert_eq!(g.mu0, 0.1);
        assert_eq!(g.mu1, 0.1);
        assert!(g.pi >= 0.01 && g.pi <= 0.99);
    }

    #[test]
    fn empty_arm() {
        let data = dataset(50, 3, None);
        let treated = Dataset::new(
            data.schema().clone(),
            data.y().to_vec(),
            Some(vec![1; 50]),
            (0..50).flat_map(|i| data.z().row(i).to_vec()).collect(),
        )
        .unwrap();
        let spec = MomentSpec::new(MomentKind::CateAipw);
        assert_eq!(
            fit_nuisance(&treated, &spec, FittingScheme::SameSample, &small_config(), 0),
            Err(Error::EmptyArm { arm: 0 })
        );
    }

    #[test]
    fn bad_schemes() {
        assert!(FittingScheme::KFold { k: 1 }.validate().is_err());
        assert!(FittingScheme::IndependentSplit { fraction: 1.0 }.validate().is_err());
        assert!(FittingScheme::IndependentSplit { fraction: 0.5 }.validate().is_ok());
    }

    #[test]
    fn independent_split_partitions_units() {
        let data = dataset(101, 4, None);
        let spec = MomentSpec::new(MomentKind::CateAipw);
        let fit = fit_nuisance(
            &data,
            &spec,
            FittingScheme::IndependentSplit { fraction: 0.5 },
            &small_config(),
            5,
        )
        .unwrap();
        assert_eq!(fit.estimation_sample.len(), 50);
    }

    #[test]
    fn stable_mean_of_constants() {
        assert_eq!(stable_mean([0.1, 0.1, 0.1].into_iter()), 0.1);
        assert!((stable_mean([1.0, 2.0, 6.0].into_iter()) - 3.0).abs() < 1e-15);
    }
}
