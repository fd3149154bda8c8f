//! Parametric data generating processes with closed-form `θ0` and a Monte
//! Carlo harness measuring coverage, width and error of the band.
//!
//! Covariates are `Z ~ U[0,1]^p`; the conditioning vector `X` is the first
//! `q` coordinates. Both potential outcomes are drawn for every unit:
//!
//! ```text
//! Y(0) = μ0(Z) + σ ε0,   Y(1) = μ0(Z) + θ0(X) + σ ε1,   W ~ Bernoulli(π(Z))
//! ```
//!
//! with `μ0(z) = baseline · (z_1 + z_p) / 2`. Under `pure_regression` there is
//! no treatment and `Y = θ0(X) + σ ε`, so `θ0(x) = E[Y | X = x]`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{make_query_grid, Dataset, QueryVector, Schema};
use crate::error::{Error, Result};
use crate::math;
use crate::moments::{MomentKind, MomentSpec};
use crate::pipeline::{run_pipeline, PipelineConfig, SubsampleSize};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpKind {
    /// `θ0(x) = τ + slope · x_1`.
    LinearCate,
    /// `θ0(x) = τ + slope · sin(π x_1) · (1 + x_2) / 2` (the last factor is 1 when `q = 1`).
    NonlinearCate,
    /// Conditional mean `θ0(x) = τ + slope · x_1`, no treatment.
    PureRegression,
}

impl DgpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DgpKind::LinearCate => "linear_cate",
            DgpKind::NonlinearCate => "nonlinear_cate",
            DgpKind::PureRegression => "pure_regression",
        }
    }

    pub fn moment(&self) -> MomentKind {
        match self {
            DgpKind::PureRegression => MomentKind::ConditionalMean,
            _ => MomentKind::CateAipw,
        }
    }
}

impl core::str::FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_cate" => Ok(DgpKind::LinearCate),
            "nonlinear_cate" => Ok(DgpKind::NonlinearCate),
            "pure_regression" => Ok(DgpKind::PureRegression),
            other => Err(Error::Config(alloc::format!("unknown dgp `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propensity {
    Constant(f64),
    /// `π(z) = logistic(intercept + slope · (z_1 − 1/2))`, clipped to `[0.05, 0.95]`.
    Logistic { intercept: f64, slope: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Conditioning dimension.
    pub q: usize,
    /// Covariates beyond the conditioning vector.
    pub extra: usize,
    pub tau: f64,
    pub slope: f64,
    pub baseline: f64,
    pub propensity: Propensity,
    pub noise: f64,
}

impl DgpSpec {
    /// `θ0(x) = x_1` on `[0,1]²` with one extra covariate.
    pub fn linear_cate() -> Self {
        DgpSpec {
            kind: DgpKind::LinearCate,
            q: 2,
            extra: 1,
            tau: 0.0,
            slope: 1.0,
            baseline: 1.0,
            propensity: Propensity::Logistic {
                intercept: 0.0,
                slope: 1.0,
            },
            noise: 1.0,
        }
    }

    pub fn nonlinear_cate() -> Self {
        DgpSpec {
            kind: DgpKind::NonlinearCate,
            ..DgpSpec::linear_cate()
        }
    }

    pub fn pure_regression() -> Self {
        DgpSpec {
            kind: DgpKind::PureRegression,
            ..DgpSpec::linear_cate()
        }
    }

    pub fn p(&self) -> usize {
        self.q + self.extra
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("dgp needs q >= 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(alloc::format!("noise scale must be finite and >= 0, got {}", self.noise)));
        }
        for v in [self.tau, self.slope, self.baseline] {
            if !v.is_finite() {
                return Err(Error::Config("dgp coefficients must be finite".into()));
            }
        }
        match self.propensity {
            Propensity::Constant(p) if !(0.05..=0.95).contains(&p) => Err(Error::Config(alloc::format!(
                "constant propensity must lie in [0.05, 0.95], got {p}"
            ))),
            Propensity::Logistic { intercept, slope } if !(intercept.is_finite() && slope.is_finite()) => {
                Err(Error::Config("propensity coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn theta0(&self, x: &[f64]) -> f64 {
        match self.kind {
            DgpKind::LinearCate | DgpKind::PureRegression => self.tau + self.slope * x[0],
            DgpKind::NonlinearCate => {
                let second = if x.len() > 1 { (1.0 + x[1]) / 2.0 } else { 1.0 };
                self.tau + self.slope * math::sin(core::f64::consts::PI * x[0]) * second
            }
        }
    }

    pub fn mu0(&self, z: &[f64]) -> f64 {
        self.baseline * (z[0] + z[z.len() - 1]) / 2.0
    }

    pub fn propensity(&self, z: &[f64]) -> f64 {
        match self.propensity {
            Propensity::Constant(p) => p,
            Propensity::Logistic { intercept, slope } => {
                let p = 1.0 / (1.0 + math::exp(-(intercept + slope * (z[0] - 0.5))));
                p.clamp(0.05, 0.95)
            }
        }
    }

    pub fn schema(&self) -> Result<Schema> {
        let covariates: Vec<String> = (1..=self.p()).map(|k| alloc::format!("z{k}")).collect();
        let treatment = match self.kind {
            DgpKind::PureRegression => None,
            _ => Some(String::from("w")),
        };
        Schema::new("y", treatment, covariates, (0..self.q).collect())
    }

    /// `[0,1]^q` grid with `resolution` cells per axis.
    pub fn query_grid(&self, resolution: usize) -> Result<QueryVector> {
        make_query_grid(&alloc::vec![(0.0, 1.0); self.q], &alloc::vec![resolution; self.q])
    }
}

/// One simulated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    pub data: Dataset,
    /// `θ0` at each query.
    pub theta0: Vec<f64>,
    /// Realized unit-level effects `θ0(X_i) + σ(ε1 − ε0)`; the outcome itself
    /// under `pure_regression`.
    pub effects: Vec<f64>,
}

/// Draw `n` i.i.d. units and evaluate `θ0` at `queries`.
pub fn generate(dgp: &DgpSpec, n: usize, queries: &QueryVector, seed: u64) -> Result<SimDraw> {
    dgp.validate()?;
    if n < 50 {
        return Err(Error::EmptyData(n));
    }
    queries.check_dim(dgp.q)?;
    let p = dgp.p();
    let mut rng = seed::rng(seed::tagged(seed, b"dgp"));
    let mut z = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut effects = Vec::with_capacity(n);
    for _ in 0..n {
        let start = z.len();
        for _ in 0..p {
            z.push(rng.random::<f64>());
        }
        let zi = &z[start..];
        let e0: f64 = rng.sample(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let theta = dgp.theta0(&zi[..dgp.q]);
        match dgp.kind {
            DgpKind::PureRegression => {
                let yi = theta + dgp.noise * e0;
                y.push(yi);
                effects.push(yi);
            }
            _ => {
                let mu0 = dgp.mu0(zi);
                let y0 = mu0 + dgp.noise * e0;
                let y1 = mu0 + theta + dgp.noise * e1;
                let wi = u8::from(u < dgp.propensity(zi));
                y.push(if wi == 1 { y1 } else { y0 });
                w.push(wi);
                effects.push(theta + dgp.noise * (e1 - e0));
            }
        }
    }
    let w = match dgp.kind {
        DgpKind::PureRegression => None,
        _ => Some(w),
    };
    let data = Dataset::new(dgp.schema()?, y, w, z)?;
    let theta0 = queries.iter().map(|x| dgp.theta0(x)).collect();
    Ok(SimDraw { data, theta0, effects })
}

/// Subsample proportion as a function of the sample multiplier `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BnRule {
    /// `b/n = c`.
    Fixed(f64),
    /// `b/n = (2/(h+1)) c`.
    Interpolated(f64),
    /// `b/n = c/h`.
    Inverse(f64),
}

impl BnRule {
    pub fn fraction(&self, h: f64) -> f64 {
        match *self {
            BnRule::Fixed(c) => c,
            BnRule::Interpolated(c) => 2.0 / (h + 1.0) * c,
            BnRule::Inverse(c) => c / h,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            BnRule::Fixed(c) => alloc::format!("{c}"),
            BnRule::Interpolated(c) => alloc::format!("(2/(h+1))*{c}"),
            BnRule::Inverse(c) => alloc::format!("{c}/h"),
        }
    }

    pub fn default_regimes() -> Vec<BnRule> {
        alloc::vec![BnRule::Fixed(0.05), BnRule::Interpolated(0.05), BnRule::Inverse(0.05)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub dgp: DgpSpec,
    pub base_n: usize,
    pub multipliers: Vec<f64>,
    pub regimes: Vec<BnRule>,
    pub reps: usize,
    pub alpha: f64,
    /// Cells per axis of the `[0,1]^q` query grid.
    pub grid: usize,
    /// Template for each fit; `b`, `alpha` and `seed` are set per cell and rep.
    pub pipeline: PipelineConfig,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            dgp: DgpSpec::linear_cate(),
            base_n: 2438,
            multipliers: alloc::vec![1.0, 2.5, 5.0, 7.5],
            regimes: BnRule::default_regimes(),
            reps: 200,
            alpha: 0.1,
            grid: 5,
            pipeline: PipelineConfig::default(),
            seed: 0,
        }
    }
}

/// Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub mean: f64,
    pub se: f64,
}

impl Metric {
    pub fn from_values(values: &[f64]) -> Metric {
        let m = values.len();
        if m == 0 {
            return Metric {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = math::mean(values);
        let var = math::sample_variance(values.iter().copied());
        Metric {
            mean,
            se: math::sqrt(var / m as f64),
        }
    }
}

/// Per-rep outcomes for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepResult {
    pub covered: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub avg_width: f64,
    /// `max_j |θ̂_j − θ0_j|` over retained queries.
    pub max_error: f64,
    /// Mean of `|θ̂_j − θ0_j|` over retained queries.
    pub avg_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub h: f64,
    pub n: usize,
    pub regime: BnRule,
    pub bn: f64,
    pub b: Option<usize>,
    pub reps: usize,
    pub failed: usize,
    pub coverage: Metric,
    pub lower_coverage: Metric,
    pub upper_coverage: Metric,
    pub avg_width: Metric,
    pub max_bias: Metric,
    pub avg_bias: Metric,
    /// Per-rep outcomes in rep order; `None` marks a failed rep.
    pub outcomes: Vec<Option<RepResult>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub seed: u64,
    pub reps: usize,
    pub alpha: f64,
    pub d: usize,
}

/// Paired Monte Carlo difference `f(a) − f(b)` over reps that succeeded in
/// both rows. Rows from one sweep share draws across regimes, so the pairing
/// removes the common sampling noise.
pub fn paired_difference(a: &CoverageRow, b: &CoverageRow, f: impl Fn(&RepResult) -> f64) -> Metric {
    let diffs: Vec<f64> = a
        .outcomes
        .iter()
        .zip(&b.outcomes)
        .filter_map(|(x, y)| Some(f(x.as_ref()?) - f(y.as_ref()?)))
        .collect();
    Metric::from_values(&diffs)
}

/// Fit one draw and score its band against the truth.
pub fn score_rep(draw: &SimDraw, queries: &QueryVector, config: &PipelineConfig) -> Result<(RepResult, usize)> {
    let out = run_pipeline(&draw.data, queries, config)?;
    let band = &out.band;
    let kept: Vec<usize> = (0..band.theta_hat.len()).filter(|&j| band.statuses[j].is_ok()).collect();
    if kept.is_empty() {
        return Err(Error::EmptySupport);
    }
    let truth = &draw.theta0;
    let lower_ok = kept.iter().all(|&j| band.lower[j] <= truth[j]);
    let upper_ok = kept.iter().all(|&j| truth[j] <= band.upper[j]);
    let errors: Vec<f64> = kept.iter().map(|&j| math::abs(band.theta_hat[j] - truth[j])).collect();
    let widths: Vec<f64> = kept.iter().map(|&j| band.width(j)).collect();
    let result = RepResult {
        covered: lower_ok && upper_ok,
        lower_ok,
        upper_ok,
        avg_width: math::mean(&widths),
        max_error: errors.iter().copied().fold(0.0, f64::max),
        avg_error: math::mean(&errors),
    };
    Ok((result, out.resolved.b))
}

/// Run every `(h, regime)` cell. Draws are shared across regimes within a
/// multiplier, so regime comparisons use common random numbers.
pub fn run_coverage(config: &CoverageConfig) -> Result<CoverageReport> {
    config.dgp.validate()?;
    if config.reps == 0 {
        return Err(Error::ZeroReplicates);
    }
    if config.multipliers.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::Config("multipliers must be positive".into()));
    }
    let queries = config.dgp.query_grid(config.grid)?;
    let data_root = seed::tagged(config.seed, b"sim-data");
    let fit_root = seed::tagged(config.seed, b"sim-fit");
    let mut rows = Vec::new();
    for (hi, &h) in config.multipliers.iter().enumerate() {
        let n = math::ceil_count(h * config.base_n as f64 - 0.5);
        for regime in &config.regimes {
            let bn = regime.fraction(h);
            let results = crate::par::map_range(config.reps, |rep| {
                let cell_seed = seed::derive(seed::derive(data_root, hi as u64), rep as u64);
                let draw = generate(&config.dgp, n, &queries, cell_seed)?;
                let pipeline = PipelineConfig {
                    moment: MomentSpec {
                        kind: config.dgp.kind.moment(),
                        ..config.pipeline.moment
                    },
                    b: SubsampleSize::Fraction(bn),
                    alpha: config.alpha,
                    seed: seed::derive(seed::derive(fit_root, hi as u64), rep as u64),
                    ..config.pipeline.clone()
                };
                score_rep(&draw, &queries, &pipeline)
            });
            let mut ok = Vec::new();
            let mut outcomes = Vec::with_capacity(config.reps);
            let mut failed = 0usize;
            let mut b = None;
            for (rep, r) in results.into_iter().enumerate() {
                match r {
                    Ok((res, bb)) => {
                        ok.push(res);
                        outcomes.push(Some(res));
                        b = Some(bb);
                    }
                    Err(e) => {
                        log::warn!("h = {h}, b/n = {bn}: rep {rep} failed: {e}");
                        outcomes.push(None);
                        failed += 1;
                    }
                }
            }
            let metric = |f: &dyn Fn(&RepResult) -> f64| Metric::from_values(&ok.iter().map(f).collect::<Vec<_>>());
            rows.push(CoverageRow {
                h,
                n,
                regime: *regime,
                bn,
                b,
                reps: config.reps,
                failed,
                coverage: metric(&|r| f64::from(u8::from(r.covered))),
                lower_coverage: metric(&|r| f64::from(u8::from(r.lower_ok))),
                upper_coverage: metric(&|r| f64::from(u8::from(r.upper_ok))),
                avg_width: metric(&|r| r.avg_width),
                max_bias: metric(&|r| r.max_error),
                avg_bias: metric(&|r| r.avg_error),
                outcomes,
            });
        }
    }
    Ok(CoverageReport {
        rows,
        seed: config.seed,
        reps: config.reps,
        alpha: config.alpha,
        d: queries.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta0_by_construction() {
        let dgp = DgpSpec::linear_cate();
        assert_eq!(dgp.theta0(&[0.3, 0.9]), 0.3);
        let q = QueryVector::new(alloc::vec![alloc::vec![0.3, 0.5]]).unwrap();
        let draw = generate(&dgp, 60, &q, 1).unwrap();
        assert_eq!(draw.theta0, alloc::vec![0.3]);
    }

    #[test]
    fn noiseless_constant_effect() {
        let dgp = DgpSpec {
            slope: 0.0,
            tau: 0.75,
            noise: 0.0,
            ..DgpSpec::linear_cate()
        };
        let q = dgp.query_grid(2).unwrap();
        let draw = generate(&dgp, 100, &q, 3).unwrap();
        assert!(draw.effects.iter().all(|&e| e == 0.75));
    }

    #[test]
    fn constant_propensity_share() {
        let dgp = DgpSpec {
            propensity: Propensity::Constant(0.5),
            ..DgpSpec::linear_cate()
        };
        let n = 4000;
        let q = dgp.query_grid(1).unwrap();
        let draw = generate(&dgp, n, &q, 9).unwrap();
        let treated = draw.data.w().unwrap().iter().filter(|&&w| w == 1).count() as f64 / n as f64;
        assert!((treated - 0.5).abs() <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn propensity_bounds() {
        let dgp = DgpSpec {
            propensity: Propensity::Logistic {
                intercept: 0.0,
                slope: 50.0,
            },
            ..DgpSpec::linear_cate()
        };
        assert_eq!(dgp.propensity(&[0.0, 0.0, 0.0]), 0.05);
        assert_eq!(dgp.propensity(&[1.0, 0.0, 0.0]), 0.95);
        assert!(DgpSpec {
            propensity: Propensity::Constant(0.99),
            ..DgpSpec::linear_cate()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn small_n_rejected() {
        let dgp = DgpSpec::linear_cate();
        let q = dgp.query_grid(1).unwrap();
        assert!(generate(&dgp, 49, &q, 0).is_err());
    }

    #[test]
    fn rules() {
        assert_eq!(BnRule::Fixed(0.05).fraction(5.0), 0.05);
        assert!((BnRule::Interpolated(0.05).fraction(3.0) - 0.025).abs() < 1e-15);
        assert!((BnRule::Inverse(0.05).fraction(2.5) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn paired_difference_skips_failed_reps() {
        let rep = |w: f64| RepResult {
            covered: true,
            lower_ok: true,
            upper_ok: true,
            avg_width: w,
            max_error: 0.0,
            avg_error: 0.0,
        };
        let row = |outcomes: Vec<Option<RepResult>>| CoverageRow {
            h: 1.0,
            n: 100,
            regime: BnRule::Fixed(0.05),
            bn: 0.05,
            b: Some(5),
            reps: outcomes.len(),
            failed: outcomes.iter().filter(|o| o.is_none()).count(),
            coverage: Metric::from_values(&[]),
            lower_coverage: Metric::from_values(&[]),
            upper_coverage: Metric::from_values(&[]),
            avg_width: Metric::from_values(&[]),
            max_bias: Metric::from_values(&[]),
            avg_bias: Metric::from_values(&[]),
            outcomes,
        };
        let a = row(alloc::vec![Some(rep(3.0)), Some(rep(5.0)), None, Some(rep(4.0))]);
        let b = row(alloc::vec![Some(rep(1.0)), None, Some(rep(9.0)), Some(rep(1.0))]);
        let d = paired_difference(&a, &b, |r| r.avg_width);
        // Reps 0 and 3 only: differences 2 and 3.
        assert_eq!(d.mean, 2.5);
        assert!((d.se - 0.5).abs() < 1e-15);
    }
}
