//! Flat `key = value` run configuration.
//!
//! Sources are layered: built-in defaults, then the config file, then
//! command-line overrides. Every key is parsed and checked before any
//! command starts work; an unknown key is an error naming that key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use localband::bootstrap::{BootstrapMode, OddPolicy};
use localband::kernels::{KernelKind, SplitConfig};
use localband::moments::{MomentKind, MomentSpec};
use localband::nuisance::{FittingScheme, NuisanceConfig};
use localband::pipeline::{PipelineConfig, SubsampleSize};
use localband::sim::{BnRule, CoverageConfig, DgpKind, DgpSpec, Propensity};

use crate::error::CliError;

/// `(key, default, description)`. An empty default means "unset".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "", "input CSV (header row, one observation per row)"),
    ("out", "out", "output directory"),
    ("fit_dir", "", "fit bundle directory read by `band`"),
    ("queries", "", "CSV of query points; overrides the grid"),
    ("outcome", "y", "outcome column"),
    ("treatment", "", "binary treatment column (required by cate_aipw)"),
    ("covariates", "", "comma-separated covariate columns; unset = all other columns"),
    ("conditioning", "", "comma-separated conditioning covariates; unset = all covariates"),
    ("grid_resolution", "5", "query grid cells per conditioning axis"),
    ("grid_bounds", "", "lo:hi per axis, comma-separated; unset = data range"),
    ("moment", "cate_aipw", "cate_aipw | conditional_mean"),
    ("pi_clip", "0.01", "propensity clip level"),
    ("scheme", "same_sample", "nuisance scheme: same_sample | independent_split | kfold"),
    ("split_fraction", "0.5", "nuisance share under independent_split"),
    ("folds", "2", "fold count under kfold"),
    ("known_propensity", "", "constant propensity used instead of a fitted one"),
    ("nuisance_bn", "0.025", "nuisance subsample proportion"),
    ("nuisance_trees", "", "trees per nuisance forest; unset = max((n/b)^2, 2000)"),
    ("nuisance_min_leaf", "5", "minimum structure units per nuisance leaf"),
    ("kernel", "tree", "tree | knn"),
    ("knn_k", "10", "neighbours for the knn kernel"),
    ("min_leaf", "5", "minimum structure units per leaf"),
    ("max_depth", "", "tree depth cap; unset = grow fully"),
    ("mtry", "", "candidate axes per split; unset = ceil(q/3)"),
    ("bn", "0.05", "subsample proportion b/n"),
    ("b", "", "fixed subsample size; overrides bn"),
    ("trees", "", "kernels r; unset = max((n/b)^2, 2000)"),
    ("trees_per_group", "", "kernels per little-bags group; unset = ceil(r/replicates)"),
    ("replicates", "200", "bootstrap replicates B"),
    ("alpha", "0.1", "band level"),
    ("mode", "half_grouped", "half_exact | half_grouped | binomial | crossfit | crossfit(k)"),
    ("odd_policy", "lenient", "odd sample sizes: lenient (drop one unit) | strict (error)"),
    ("seed", "0", "master seed"),
    ("threads", "0", "worker threads; 0 = all cores"),
    ("dgp", "linear_cate", "simulate: linear_cate | nonlinear_cate | pure_regression"),
    ("dgp_q", "2", "simulate: conditioning dimension"),
    ("dgp_extra", "1", "simulate: covariates beyond the conditioning vector"),
    ("dgp_tau", "0", "simulate: effect intercept"),
    ("dgp_slope", "1", "simulate: effect slope"),
    ("dgp_baseline", "1", "simulate: baseline outcome scale"),
    ("dgp_noise", "1", "simulate: noise scale"),
    ("propensity", "logistic", "simulate: logistic | constant"),
    ("propensity_value", "0.5", "simulate: constant propensity"),
    ("propensity_intercept", "0", "simulate: logistic intercept"),
    ("propensity_slope", "1", "simulate: logistic slope in z1 - 1/2"),
    ("base_n", "2438", "simulate: sample size at h = 1"),
    ("multipliers", "1,2.5,5,7.5", "simulate: sample multipliers h"),
    ("regimes", "fixed:0.05,interpolated:0.05,inverse:0.05", "simulate: b/n rules (fixed:c, interpolated:c, inverse:c)"),
    ("reps", "200", "simulate: Monte Carlo repetitions per cell"),
    ("ustat_kernel", "pairwise", "ustat: additive | product | pairwise | knn_moment"),
    ("ustat_lambda", "0.25", "ustat: interaction weight of the pairwise kernel"),
    ("ustat_law", "-1.7:0.15,-0.6:0.25,0.3:0.3,1.1:0.2,2.2:0.1", "ustat: atoms as value:probability"),
    ("ustat_n", "40", "ustat: sample sizes"),
    ("ustat_b", "1,2,3,4", "ustat: kernel orders"),
    ("ustat_reps", "200", "ustat: Monte Carlo repetitions per cell"),
    ("ustat_budget", "10000000", "ustat: enumeration budget"),
    ("ustat_knn_k", "1", "ustat: neighbours of the knn_moment kernel"),
];

/// Keys `band` may change relative to a stored fit.
pub const BAND_MUTABLE: &[&str] = &["alpha", "out", "threads", "fit_dir", "queries", "grid_resolution", "grid_bounds"];

/// The `--help` table of keys and defaults.
pub fn help_table() -> String {
    let mut s = String::from("Config keys (key = value, # comments; flags override the file):\n");
    for (key, default, doc) in KEYS {
        let default = if default.is_empty() { "unset" } else { default };
        let _ = writeln!(s, "  {key:<22} {doc} [default: {default}]");
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct UstatConfig {
    pub kernel: String,
    pub lambda: f64,
    pub law: Vec<(f64, f64)>,
    pub ns: Vec<usize>,
    pub bs: Vec<usize>,
    pub reps: usize,
    pub budget: u128,
    pub knn_k: usize,
}

/// Fully parsed configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Effective value of every key, defaults included.
    pub values: BTreeMap<String, String>,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub fit_dir: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub outcome: String,
    pub treatment: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub conditioning: Option<Vec<String>>,
    pub grid_resolution: usize,
    pub grid_bounds: Option<Vec<(f64, f64)>>,
    pub pipeline: PipelineConfig,
    pub threads: usize,
    pub coverage: CoverageConfig,
    pub ustat: UstatConfig,
}

/// Parse config file text into ordered `(key, value)` pairs.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let key = k.trim().to_string();
        if pairs.iter().any(|(seen, _)| *seen == key) {
            return Err(CliError::config(format!("line {}: key `{key}` set twice", lineno + 1)).with_key(&key));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

fn strip_comment(line: &str) -> &str {
    if line.trim_start().starts_with('#') {
        return "";
    }
    // Inline comments need whitespace before the '#'.
    match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None => line,
    }
}

impl RunConfig {
    /// Layer defaults, then `file`, then `overrides`.
    pub fn from_sources(file: &[(String, String)], overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        for (k, v) in file.iter().chain(overrides) {
            match values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => return Err(CliError::config(format!("unknown config key `{k}`")).with_key(k)),
            }
        }
        Self::from_values(values)
    }

    pub fn from_values(values: BTreeMap<String, String>) -> Result<Self, CliError> {
        let v = Values(&values);
        let split = SplitConfig {
            min_leaf: v.parse("min_leaf")?,
            max_depth: v.opt("max_depth")?,
            mtry: v.opt("mtry")?,
        };
        let kernel = match v.str("kernel") {
            "tree" => KernelKind::Tree(split),
            "knn" => KernelKind::Knn(v.parse("knn_k")?),
            other => return Err(bad("kernel", other, "expected tree or knn")),
        };
        let scheme = match v.str("scheme") {
            "same_sample" => FittingScheme::SameSample,
            "independent_split" => FittingScheme::IndependentSplit {
                fraction: v.parse("split_fraction")?,
            },
            "kfold" => FittingScheme::KFold { k: v.parse("folds")? },
            other => return Err(bad("scheme", other, "expected same_sample, independent_split or kfold")),
        };
        scheme.validate().map_err(|e| CliError::from(e).with_key("scheme"))?;
        let kind: MomentKind = v.parse("moment")?;
        let moment = MomentSpec::with_clip(kind, v.parse("pi_clip")?).map_err(|e| CliError::from(e).with_key("pi_clip"))?;
        let nuisance = NuisanceConfig {
            split: SplitConfig {
                min_leaf: v.parse("nuisance_min_leaf")?,
                ..SplitConfig::default()
            },
            b_fraction: v.parse("nuisance_bn")?,
            trees: v.opt("nuisance_trees")?,
            known_propensity: v.opt("known_propensity")?,
        };
        if !(nuisance.b_fraction > 0.0 && nuisance.b_fraction <= 1.0) {
            return Err(bad("nuisance_bn", v.str("nuisance_bn"), "must lie in (0, 1]"));
        }
        let b = match v.opt::<usize>("b")? {
            Some(b) => SubsampleSize::Fixed(b),
            None => {
                let f: f64 = v.parse("bn")?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(bad("bn", v.str("bn"), "must lie in (0, 1]"));
                }
                SubsampleSize::Fraction(f)
            }
        };
        let alpha: f64 = v.parse("alpha")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad("alpha", v.str("alpha"), "must lie in (0, 1)"));
        }
        let odd_policy = match v.str("odd_policy") {
            "lenient" => OddPolicy::Lenient,
            "strict" => OddPolicy::Strict,
            other => return Err(bad("odd_policy", other, "expected lenient or strict")),
        };
        let pipeline = PipelineConfig {
            moment,
            scheme,
            nuisance,
            kernel,
            b,
            trees: v.opt("trees")?,
            trees_per_group: v.opt("trees_per_group")?,
            replicates: v.parse("replicates")?,
            alpha,
            mode: v.parse::<BootstrapMode>("mode")?,
            odd_policy,
            seed: v.parse("seed")?,
        };

        let propensity = match v.str("propensity") {
            "logistic" => Propensity::Logistic {
                intercept: v.parse("propensity_intercept")?,
                slope: v.parse("propensity_slope")?,
            },
            "constant" => Propensity::Constant(v.parse("propensity_value")?),
            other => return Err(bad("propensity", other, "expected logistic or constant")),
        };
        let dgp = DgpSpec {
            kind: v.parse::<DgpKind>("dgp")?,
            q: v.parse("dgp_q")?,
            extra: v.parse("dgp_extra")?,
            tau: v.parse("dgp_tau")?,
            slope: v.parse("dgp_slope")?,
            baseline: v.parse("dgp_baseline")?,
            propensity,
            noise: v.parse("dgp_noise")?,
        };
        dgp.validate().map_err(|e| CliError::from(e).with_key("dgp"))?;
        let regimes = v
            .list("regimes")
            .iter()
            .map(|r| parse_regime(r))
            .collect::<Result<Vec<_>, _>>()?;
        let coverage = CoverageConfig {
            dgp,
            base_n: v.parse("base_n")?,
            multipliers: v.parse_list("multipliers")?,
            regimes,
            reps: v.parse("reps")?,
            alpha,
            grid: v.parse("grid_resolution")?,
            pipeline: pipeline.clone(),
            seed: pipeline.seed,
        };

        let law = v
            .list("ustat_law")
            .iter()
            .map(|atom| {
                let (x, p) = atom
                    .split_once(':')
                    .ok_or_else(|| bad("ustat_law", atom, "atoms are value:probability"))?;
                let x: f64 = x.trim().parse().map_err(|_| bad("ustat_law", atom, "bad atom value"))?;
                let p: f64 = p.trim().parse().map_err(|_| bad("ustat_law", atom, "bad probability"))?;
                Ok((x, p))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let ustat_kernel = v.str("ustat_kernel").to_string();
        if !["additive", "product", "pairwise", "knn_moment"].contains(&ustat_kernel.as_str()) {
            return Err(bad("ustat_kernel", &ustat_kernel, "expected additive, product, pairwise or knn_moment"));
        }
        let ustat = UstatConfig {
            kernel: ustat_kernel,
            lambda: v.parse("ustat_lambda")?,
            law,
            ns: v.parse_list("ustat_n")?,
            bs: v.parse_list("ustat_b")?,
            reps: v.parse("ustat_reps")?,
            budget: v.parse("ustat_budget")?,
            knn_k: v.parse("ustat_knn_k")?,
        };

        let grid_bounds = match v.str("grid_bounds") {
            "" => None,
            _ => Some(
                v.list("grid_bounds")
                    .iter()
                    .map(|axis| {
                        let (lo, hi) = axis
                            .split_once(':')
                            .ok_or_else(|| bad("grid_bounds", axis, "axes are lo:hi"))?;
                        let lo: f64 = lo.trim().parse().map_err(|_| bad("grid_bounds", axis, "bad lower bound"))?;
                        let hi: f64 = hi.trim().parse().map_err(|_| bad("grid_bounds", axis, "bad upper bound"))?;
                        Ok((lo, hi))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?,
            ),
        };
        let grid_resolution: usize = v.parse("grid_resolution")?;
        if grid_resolution == 0 {
            return Err(bad("grid_resolution", "0", "must be at least 1"));
        }

        Ok(RunConfig {
            data: v.path("data"),
            out: PathBuf::from(v.str("out")),
            fit_dir: v.path("fit_dir"),
            queries: v.path("queries"),
            outcome: v.str("outcome").to_string(),
            treatment: v.opt_str("treatment"),
            covariates: v.opt_list("covariates"),
            conditioning: v.opt_list("conditioning"),
            grid_resolution,
            grid_bounds,
            pipeline,
            threads: v.parse("threads")?,
            coverage,
            ustat,
            values,
        })
    }

    /// Render the effective values as a config file.
    pub fn to_file_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn parse_regime(s: &str) -> Result<BnRule, CliError> {
    let (rule, c) = s.split_once(':').ok_or_else(|| bad("regimes", s, "rules are name:constant"))?;
    let c: f64 = c.trim().parse().map_err(|_| bad("regimes", s, "bad constant"))?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(bad("regimes", s, "constant must lie in (0, 1]"));
    }
    match rule.trim() {
        "fixed" => Ok(BnRule::Fixed(c)),
        "interpolated" => Ok(BnRule::Interpolated(c)),
        "inverse" => Ok(BnRule::Inverse(c)),
        _ => Err(bad("regimes", s, "expected fixed, interpolated or inverse")),
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::config(format!("key `{key}`: invalid value `{value}`: {why}")).with_key(key)
}

struct Values<'a>(&'a BTreeMap<String, String>);

impl Values<'_> {
    fn str(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(key);
        raw.parse::<T>().map_err(|e| bad(key, raw, &e.to_string()))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if self.str(key).is_empty() {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn opt_str(&self, key: &str) -> Option<String> {
        Some(self.str(key)).filter(|s| !s.is_empty()).map(str::to_string)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.opt_str(key).map(PathBuf::from)
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.str(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }

    fn opt_list(&self, key: &str) -> Option<Vec<String>> {
        Some(self.list(key)).filter(|l| !l.is_empty())
    }

    fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        let items = self.list(key);
        if items.is_empty() {
            return Err(bad(key, "", "list must not be empty"));
        }
        items
            .iter()
            .map(|s| s.parse::<T>().map_err(|_| bad(key, s, "bad list entry")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_library() {
        let cfg = RunConfig::from_sources(&[], &[]).unwrap();
        assert_eq!(cfg.pipeline, PipelineConfig::default());
        assert_eq!(cfg.coverage.dgp, DgpSpec::linear_cate());
        assert_eq!(cfg.coverage.regimes, BnRule::default_regimes());
        assert_eq!(cfg.coverage.multipliers, vec![1.0, 2.5, 5.0, 7.5]);
        assert_eq!(cfg.coverage.base_n, CoverageConfig::default().base_n);
        assert_eq!(cfg.pipeline.alpha, 0.1);
        assert_eq!(cfg.pipeline.replicates, 200);
        assert_eq!(cfg.pipeline.b, SubsampleSize::Fraction(0.05));
        assert_eq!(cfg.ustat.law.len(), 5);
    }

    #[test]
    fn file_comments_and_overrides() {
        let text = "# comment\nbn = 0.025  # inline\n\nseed=7\npath_like = a#b\n";
        assert!(parse_file(text).is_ok());
        let pairs = parse_file("bn = 0.025  # inline\nseed=7\n").unwrap();
        let cfg = RunConfig::from_sources(&pairs, &[("seed".into(), "9".into())]).unwrap();
        assert_eq!(cfg.pipeline.b, SubsampleSize::Fraction(0.025));
        assert_eq!(cfg.pipeline.seed, 9);
    }

    #[test]
    fn unknown_and_invalid_keys() {
        let err = RunConfig::from_sources(&[("colour".into(), "red".into())], &[]).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("colour"));
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::from_sources(&[], &[("alpha".into(), "1.5".into())]).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("alpha"));
        assert!(parse_file("a = 1\na = 2\n").is_err());
        assert!(parse_file("novalue\n").is_err());
        assert!(RunConfig::from_sources(&[], &[("mode".into(), "jackknife".into())]).is_err());
        assert!(RunConfig::from_sources(&[], &[("regimes".into(), "fixed:2".into())]).is_err());
    }

    #[test]
    fn effective_values_round_trip() {
        let cfg = RunConfig::from_sources(&[], &[("trees".into(), "4000".into())]).unwrap();
        let again = RunConfig::from_sources(&parse_file(&cfg.to_file_text()).unwrap(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn help_lists_every_key() {
        let help = help_table();
        assert!(KEYS.iter().all(|(k, _, _)| help.contains(k)));
        assert!(help.contains("[default: 0.05]"));
    }
}
