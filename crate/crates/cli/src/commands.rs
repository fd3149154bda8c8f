//! The four subcommands. Each reads a validated [`RunConfig`], writes its
//! artifacts under `out`, and returns a summary for the caller to print.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use localband::bootstrap::{BootstrapMode, ConfidenceBand};
use localband::data::{make_query_grid, Dataset, QueryVector};
use localband::estimator::{LocalEstimateSet, QueryStatus};
use localband::pipeline::{band_from_forest, estimates_from_forest, grow_fit_forest, prepare, run_pipeline, run_prepared, PipelineOutput, Resolved};
use localband::seed;
use localband::sim::{run_coverage, CoverageReport, Metric};
use localband::ustat::{
    hoeffding_components, residual_scaling_experiment, Additive, DiscreteLaw, HoeffdingComponents, KnnMomentKernel, MomentAtom,
    PairwiseInteraction, Product, ScalingConfig, ScalingRow, SymmetricKernel,
};

use crate::config::{parse_file, RunConfig, BAND_MUTABLE};
use crate::error::CliError;
use crate::forest_json;
use crate::table::{self, fmt, SchemaSpec};

pub const FIT_FILE: &str = "fit.json";
pub const FOREST_FILE: &str = "forest.json";

/// Keys left out of a stored fit config: they never change results.
const UNSTORED: &[&str] = &["out", "threads", "fit_dir"];

/// Run `f` on a pool of `threads` workers; 0 uses the global pool.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::resource(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn created_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::resource(format!("{}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::resource(format!("{}: {e}", path.display())))
}

fn schema_spec(cfg: &RunConfig) -> SchemaSpec {
    SchemaSpec {
        outcome: cfg.outcome.clone(),
        treatment: cfg.treatment.clone(),
        covariates: cfg.covariates.clone(),
        conditioning: cfg.conditioning.clone(),
    }
}

fn load_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::config("no input data; set `data` or pass --data").with_key("data"))?;
    table::read_dataset(path, &schema_spec(cfg))
}

/// Query points: the `queries` CSV if given, else a cell-centre grid over
/// `grid_bounds` or the observed range of each conditioning column.
pub fn build_queries(cfg: &RunConfig, data: &Dataset) -> Result<QueryVector, CliError> {
    let q = data.q();
    if let Some(path) = &cfg.queries {
        return table::read_queries(path, q);
    }
    let bounds = match &cfg.grid_bounds {
        Some(b) if b.len() != q => {
            return Err(CliError::config(format!("grid_bounds has {} axes, expected {q}", b.len())).with_key("grid_bounds"));
        }
        Some(b) => b.clone(),
        None => (0..q)
            .map(|axis| {
                let (lo, hi) = (0..data.n())
                    .map(|i| data.x().row(i)[axis])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                (lo, hi)
            })
            .collect(),
    };
    make_query_grid(&bounds, &vec![cfg.grid_resolution; q]).map_err(|e| CliError::from(e).with_key("grid_bounds"))
}

/// Query status counts in a fixed key order.
pub fn status_counts(statuses: &[QueryStatus]) -> BTreeMap<&'static str, usize> {
    let mut counts: BTreeMap<&'static str, usize> = ["ok", "empty_support", "ill_posed"].iter().map(|s| (*s, 0)).collect();
    for s in statuses {
        *counts.entry(s.as_str()).or_insert(0) += 1;
    }
    counts
}

fn resolved_json(r: &Resolved, forest_r: usize) -> Value {
    json!({
        "n": r.n,
        "b": r.b,
        "r": forest_r,
        "trees_per_group": r.trees_per_group,
        "b_clamped": r.b_clamped,
    })
}

fn stored_config(cfg: &RunConfig) -> BTreeMap<String, String> {
    cfg.values
        .iter()
        .filter(|(k, _)| !UNSTORED.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn estimates_json(est: &LocalEstimateSet) -> Value {
    let rows: Vec<Value> = (0..est.queries.len())
        .map(|j| {
            json!({
                "x": est.queries.point(j),
                "theta_hat": est.theta_hat[j],
                "denominator": est.denominators[j],
                "support_size": est.support_sizes[j],
                "status": est.statuses[j].as_str(),
            })
        })
        .collect();
    Value::Array(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub n: usize,
    pub b: usize,
    pub r: usize,
    pub statuses: BTreeMap<&'static str, usize>,
    pub out: PathBuf,
}

impl std::fmt::Display for FitSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n={} b={} r={}", self.n, self.b, self.r)?;
        for (k, v) in &self.statuses {
            write!(f, " {k}={v}")?;
        }
        write!(f, " -> {}", self.out.display())
    }
}

/// Grow the kernel forest, estimate at the queries, and write the fit bundle:
/// `forest.json`, `estimates.csv`, `estimates.json` and `fit.json`.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitSummary, CliError> {
    let data = load_data(cfg)?;
    let queries = build_queries(cfg, &data)?;
    let out = out_dir(cfg)?;
    with_threads(cfg.threads, || -> Result<FitSummary, CliError> {
        let prepared = prepare(&data, &cfg.pipeline)?;
        let forest = grow_fit_forest(&data, &prepared, &queries, &cfg.pipeline)?;
        let est = estimates_from_forest(&data, &prepared, &forest, &queries)?;
        let forest_text = forest_json::to_json(&forest)?;
        fs::write(out.join(FOREST_FILE), forest_text)?;
        table::write_estimates(&out.join("estimates.csv"), data.schema(), &est)?;
        let statuses = status_counts(&est.statuses);
        write_json(
            &out.join("estimates.json"),
            &json!({
                "created_unix": created_unix(),
                "moment": cfg.pipeline.moment.kind.as_str(),
                "resolved": resolved_json(&prepared.resolved, forest.r()),
                "statuses": statuses,
                "rows": estimates_json(&est),
            }),
        )?;
        write_json(
            &out.join(FIT_FILE),
            &json!({
                "created_unix": created_unix(),
                "config": stored_config(cfg),
                "resolved": resolved_json(&prepared.resolved, forest.r()),
                "statuses": statuses,
            }),
        )?;
        Ok(FitSummary {
            n: prepared.resolved.n,
            b: prepared.resolved.b,
            r: forest.r(),
            statuses,
            out: out.to_path_buf(),
        })
    })?
}

/// Config of a stored fit with `cfg`'s band-level keys applied on top.
///
/// `explicit` holds the keys the user set; any of them outside
/// [`BAND_MUTABLE`] must agree with the stored value.
pub fn config_from_fit(cfg: &RunConfig, explicit: &BTreeSet<String>, fit_dir: &Path) -> Result<RunConfig, CliError> {
    let path = fit_dir.join(FIT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::resource(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)?;
    let stored = doc
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::config(format!("{}: no `config` object", path.display())))?;
    let mut values = cfg.values.clone();
    for (k, v) in stored {
        let v = v
            .as_str()
            .ok_or_else(|| CliError::config(format!("{}: config value of `{k}` is not a string", path.display())))?;
        let slot = values
            .get_mut(k)
            .ok_or_else(|| CliError::config(format!("{}: unknown config key `{k}`", path.display())).with_key(k))?;
        if explicit.contains(k) && !BAND_MUTABLE.contains(&k.as_str()) {
            if slot != v {
                return Err(CliError::config(format!(
                    "key `{k}` = `{slot}` differs from the stored fit (`{v}`); only {} may change",
                    BAND_MUTABLE.join(", ")
                ))
                .with_key(k));
            }
        } else if !explicit.contains(k) {
            *slot = v.to_string();
        }
    }
    RunConfig::from_values(values)
}

fn band_json(cfg: &RunConfig, out: &PipelineOutput) -> Value {
    let band = &out.band;
    let rows: Vec<Value> = (0..band.queries.len())
        .map(|j| {
            json!({
                "x": band.queries.point(j),
                "theta_hat": band.theta_hat[j],
                "lower": band.lower[j],
                "upper": band.upper[j],
                "lambda_hat": band.lambda_hat[j],
                "status": band.statuses[j].as_str(),
            })
        })
        .collect();
    let mode = match cfg.pipeline.mode {
        BootstrapMode::Crossfit { k } => format!("crossfit({k})"),
        m => m.name().to_string(),
    };
    json!({
        "created_unix": created_unix(),
        "cv": band.cv,
        "alpha": band.alpha,
        "n": band.n,
        "b": out.resolved.b,
        "r": out.resolved.r,
        "B": cfg.pipeline.replicates,
        "mode": mode,
        "seed": cfg.pipeline.seed,
        "moment": cfg.pipeline.moment.kind.as_str(),
        "excluded": band.excluded,
        "rows": rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSummary {
    pub d: usize,
    pub cv: f64,
    pub alpha: f64,
    pub excluded: usize,
    pub from_fit: bool,
    pub out: PathBuf,
}

impl std::fmt::Display for BandSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "d={} alpha={} cv={:.6} excluded={}{} -> {}",
            self.d,
            self.alpha,
            self.cv,
            self.excluded,
            if self.from_fit { " (stored fit)" } else { "" },
            self.out.display()
        )
    }
}

/// Confidence band from a fit bundle (`fit_dir`) or from an inline fit.
/// Writes `band.csv`, `band.json`, and `heatmap_{theta_hat,lower,upper}.csv`
/// when there are two conditioning axes.
pub fn cmd_band(cfg: &RunConfig, explicit: &BTreeSet<String>) -> Result<BandSummary, CliError> {
    let (cfg, forest) = match &cfg.fit_dir {
        Some(dir) => {
            let merged = config_from_fit(cfg, explicit, dir)?;
            let path = dir.join(FOREST_FILE);
            let text = fs::read_to_string(&path).map_err(|e| CliError::resource(format!("{}: {e}", path.display())))?;
            (merged, Some(forest_json::from_json(&text)?))
        }
        None => (cfg.clone(), None),
    };
    let data = load_data(&cfg)?;
    let queries = build_queries(&cfg, &data)?;
    let out = out_dir(&cfg)?;
    let from_fit = forest.is_some();
    let output = with_threads(cfg.threads, || -> Result<PipelineOutput, CliError> {
        match forest {
            Some(forest) => {
                if forest.plan().n != data.n() {
                    return Err(CliError::config(format!(
                        "stored forest was grown on {} rows, data has {}",
                        forest.plan().n,
                        data.n()
                    ))
                    .with_key("data"));
                }
                let prepared = prepare(&data, &cfg.pipeline)?;
                if forest.groups().is_some() {
                    Ok(band_from_forest(&data, &prepared, &forest, &queries, &cfg.pipeline)?)
                } else {
                    // Other modes regrow their replicate kernels from the stored seeds.
                    Ok(run_prepared(&data, &prepared, &queries, &cfg.pipeline)?)
                }
            }
            None => Ok(run_pipeline(&data, &queries, &cfg.pipeline)?),
        }
    })??;
    write_band_files(out, &cfg, &data, &output)?;
    Ok(BandSummary {
        d: queries.len(),
        cv: output.band.cv,
        alpha: output.band.alpha,
        excluded: output.band.excluded.len(),
        from_fit,
        out: out.to_path_buf(),
    })
}

fn write_band_files(out: &Path, cfg: &RunConfig, data: &Dataset, output: &PipelineOutput) -> Result<(), CliError> {
    let band: &ConfidenceBand = &output.band;
    table::write_band(&out.join("band.csv"), data.schema(), band)?;
    write_json(&out.join("band.json"), &band_json(cfg, output))?;
    if band.queries.dim() == 2 {
        for (name, values) in [("theta_hat", &band.theta_hat), ("lower", &band.lower), ("upper", &band.upper)] {
            table::write_heatmap(&out.join(format!("heatmap_{name}.csv")), &band.queries, values)?;
        }
    }
    Ok(())
}

fn metric_json(m: &Metric) -> Value {
    json!({"mean": m.mean, "se": m.se})
}

fn write_coverage_csv(path: &Path, report: &CoverageReport) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["h", "n", "regime", "bn", "b", "reps", "failed"].into_iter().map(String::from).collect::<Vec<_>>();
    for m in ["coverage", "lower_coverage", "upper_coverage", "avg_width", "max_bias", "avg_bias"] {
        header.push(m.to_string());
        header.push(format!("{m}_se"));
    }
    wtr.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![
            fmt(row.h),
            row.n.to_string(),
            row.regime.label(),
            fmt(row.bn),
            row.b.map_or(String::new(), |b| b.to_string()),
            row.reps.to_string(),
            row.failed.to_string(),
        ];
        for m in [row.coverage, row.lower_coverage, row.upper_coverage, row.avg_width, row.max_bias, row.avg_bias] {
            rec.push(fmt(m.mean));
            rec.push(fmt(m.se));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn coverage_json(cfg: &RunConfig, report: &CoverageReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|row| {
            json!({
                "h": row.h,
                "n": row.n,
                "regime": row.regime.label(),
                "bn": row.bn,
                "b": row.b,
                "reps": row.reps,
                "failed": row.failed,
                "coverage": metric_json(&row.coverage),
                "lower_coverage": metric_json(&row.lower_coverage),
                "upper_coverage": metric_json(&row.upper_coverage),
                "avg_width": metric_json(&row.avg_width),
                "max_bias": metric_json(&row.max_bias),
                "avg_bias": metric_json(&row.avg_bias),
            })
        })
        .collect();
    json!({
        "created_unix": created_unix(),
        "seed": report.seed,
        "data_seed": seed::tagged(report.seed, b"sim-data"),
        "fit_seed": seed::tagged(report.seed, b"sim-fit"),
        "reps": report.reps,
        "alpha": report.alpha,
        "d": report.d,
        "dgp": cfg.values["dgp"],
        "base_n": cfg.coverage.base_n,
        "failed": report.rows.iter().map(|r| r.failed).sum::<usize>(),
        "rows": rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub rows: usize,
    pub failed: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cells={} failed_reps={} seed={} -> {}", self.rows, self.failed, self.seed, self.out.display())
    }
}

/// Coverage sweep; writes `coverage.csv` and `coverage.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(SimulateSummary, CoverageReport), CliError> {
    let out = out_dir(cfg)?;
    let report = with_threads(cfg.threads, || run_coverage(&cfg.coverage))??;
    write_coverage_csv(&out.join("coverage.csv"), &report)?;
    write_json(&out.join("coverage.json"), &coverage_json(cfg, &report))?;
    let summary = SimulateSummary {
        rows: report.rows.len(),
        failed: report.rows.iter().map(|r| r.failed).sum(),
        seed: report.seed,
        out: out.to_path_buf(),
    };
    Ok((summary, report))
}

/// k-NN local-mean kernel on scalar observations: atom `v` has conditioning
/// value `v` and moment term `v`.
#[derive(Debug, Clone)]
pub struct ScalarKnnMoment(pub KnnMomentKernel);

impl SymmetricKernel<f64> for ScalarKnnMoment {
    fn order(&self) -> usize {
        self.0.order
    }

    fn eval(&self, args: &[&f64]) -> f64 {
        let atoms: Vec<MomentAtom> = args.iter().map(|&&v| MomentAtom { x: vec![v], m2: v }).collect();
        let refs: Vec<&MomentAtom> = atoms.iter().collect();
        self.0.eval(&refs)
    }

    fn declared_centered(&self) -> bool {
        self.0.centered
    }
}

fn law_mean<K: SymmetricKernel<f64>>(kernel: &K, law: &DiscreteLaw<f64>, budget: u128) -> Result<f64, CliError> {
    let mut total = 0.0;
    law.for_each_tuple(kernel.order(), budget, |idx, p| {
        let args: Vec<&f64> = idx.iter().map(|&k| &law.support()[k]).collect();
        total += p * kernel.eval(&args);
    })?;
    Ok(total)
}

fn knn_moment_kernel(b: usize, k: usize, law: &DiscreteLaw<f64>, budget: u128) -> Result<ScalarKnnMoment, CliError> {
    if k == 0 || k > b {
        return Err(CliError::config(format!("ustat_knn_k = {k} must lie in 1..={b}")).with_key("ustat_knn_k"));
    }
    let raw = ScalarKnnMoment(KnnMomentKernel {
        order: b,
        k,
        query: vec![law.mean()],
        offset: 0.0,
        centered: false,
    });
    let offset = law_mean(&raw, law, budget)?;
    Ok(ScalarKnnMoment(KnnMomentKernel {
        offset,
        centered: true,
        ..raw.0
    }))
}

/// One kernel of the registry at order `b`.
enum Registered {
    Additive(Additive),
    Product(Product),
    Pairwise(PairwiseInteraction),
    Knn(ScalarKnnMoment),
}

fn registered(cfg: &RunConfig, law: &DiscreteLaw<f64>, b: usize) -> Result<Registered, CliError> {
    let u = &cfg.ustat;
    Ok(match u.kernel.as_str() {
        "additive" => Registered::Additive(Additive::centered(b, law)),
        "product" => Registered::Product(Product {
            order: b,
            centered: law.mean().abs() <= 1e-12,
        }),
        "pairwise" => Registered::Pairwise(PairwiseInteraction::standardized(b, law, u.lambda)),
        "knn_moment" => Registered::Knn(knn_moment_kernel(b, u.knn_k, law, u.budget)?),
        other => return Err(CliError::config(format!("unknown ustat kernel `{other}`")).with_key("ustat_kernel")),
    })
}

impl SymmetricKernel<f64> for Registered {
    fn order(&self) -> usize {
        match self {
            Registered::Additive(k) => k.order(),
            Registered::Product(k) => k.order(),
            Registered::Pairwise(k) => k.order(),
            Registered::Knn(k) => k.order(),
        }
    }

    fn eval(&self, args: &[&f64]) -> f64 {
        match self {
            Registered::Additive(k) => k.eval(args),
            Registered::Product(k) => k.eval(args),
            Registered::Pairwise(k) => k.eval(args),
            Registered::Knn(k) => k.eval(args),
        }
    }

    fn declared_centered(&self) -> bool {
        match self {
            Registered::Additive(k) => k.declared_centered(),
            Registered::Product(k) => k.declared_centered(),
            Registered::Pairwise(k) => k.declared_centered(),
            Registered::Knn(k) => k.declared_centered(),
        }
    }
}

fn write_scaling_csv(path: &Path, rows: &[ScalingRow]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "n",
        "b",
        "reps",
        "residual_q50",
        "residual_q90",
        "residual_max",
        "residual_rms",
        "hajek_scale",
        "ratio",
        "dominance_fraction",
        "sigma_b2",
        "nu2",
        "b_sigma_b2",
        "variance_check",
    ])?;
    for r in rows {
        wtr.write_record([
            r.n.to_string(),
            r.b.to_string(),
            r.reps.to_string(),
            fmt(r.residual_q50),
            fmt(r.residual_q90),
            fmt(r.residual_max),
            fmt(r.residual_rms),
            fmt(r.hajek_scale),
            fmt(r.ratio),
            fmt(r.dominance_fraction),
            fmt(r.sigma_b2),
            fmt(r.nu2),
            fmt(r.b as f64 * r.sigma_b2),
            r.variance_check.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UstatSummary {
    pub kernel: String,
    pub cells: usize,
    pub all_checks_pass: bool,
    pub out: PathBuf,
}

impl std::fmt::Display for UstatSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "kernel={} cells={} variance_check={} -> {}",
            self.kernel,
            self.cells,
            if self.all_checks_pass { "pass" } else { "FAIL" },
            self.out.display()
        )
    }
}

/// Hájek-residual scaling experiment, plus Hoeffding exactness checks for
/// orders up to 3. Writes `ustat_scaling.csv`, `hoeffding.csv` and `ustat.json`.
pub fn cmd_ustat(cfg: &RunConfig) -> Result<(UstatSummary, Vec<ScalingRow>), CliError> {
    let u = &cfg.ustat;
    let (support, probs): (Vec<f64>, Vec<f64>) = u.law.iter().copied().unzip();
    let law = DiscreteLaw::new(support, probs).map_err(|e| CliError::from(e).with_key("ustat_law"))?;
    let out = out_dir(cfg)?;
    // Build every kernel up front so configuration errors surface before compute.
    let kernels: BTreeMap<usize, Registered> = u
        .bs
        .iter()
        .map(|&b| registered(cfg, &law, b).map(|k| (b, k)))
        .collect::<Result<_, _>>()?;
    let scaling = ScalingConfig {
        ns: u.ns.clone(),
        bs: u.bs.clone(),
        reps: u.reps,
        seed: seed::tagged(cfg.pipeline.seed, b"ustat"),
        budget: u.budget,
    };
    let (rows, hoeffding) = with_threads(cfg.threads, || -> Result<_, CliError> {
        let rows = residual_scaling_experiment(&law, |b| registered(cfg, &law, b).expect("validated kernel"), &scaling)?;
        let hoeffding: Vec<(usize, HoeffdingComponents)> = kernels
            .iter()
            .filter(|(b, _)| **b <= 3)
            .map(|(&b, k)| hoeffding_components(k, &law, u.budget).map(|h| (b, h)))
            .collect::<Result<_, _>>()?;
        Ok((rows, hoeffding))
    })??;
    write_scaling_csv(&out.join("ustat_scaling.csv"), &rows)?;
    let mut wtr = csv::Writer::from_path(out.join("hoeffding.csv"))?;
    wtr.write_record(["b", "max_abs_mean", "max_abs_cross_cov", "max_reconstruction_error"])?;
    for (b, h) in &hoeffding {
        wtr.write_record([b.to_string(), fmt(h.max_abs_mean), fmt(h.max_abs_cross_cov), fmt(h.max_reconstruction_error)])?;
    }
    wtr.flush()?;
    let all_checks_pass = rows.iter().all(|r| r.variance_check);
    write_json(
        &out.join("ustat.json"),
        &json!({
            "created_unix": created_unix(),
            "kernel": u.kernel,
            "lambda": u.lambda,
            "law": u.law,
            "seed": scaling.seed,
            "reps": u.reps,
            "budget": u.budget.to_string(),
            "variance_check_all": all_checks_pass,
            "rows": rows.iter().map(|r| json!({
                "n": r.n, "b": r.b, "reps": r.reps,
                "residual_q50": r.residual_q50, "residual_q90": r.residual_q90,
                "residual_max": r.residual_max, "residual_rms": r.residual_rms,
                "hajek_scale": r.hajek_scale, "ratio": r.ratio,
                "dominance_fraction": r.dominance_fraction,
                "sigma_b2": r.sigma_b2, "nu2": r.nu2,
                "b_sigma_b2": r.b as f64 * r.sigma_b2,
                "variance_check": r.variance_check,
            })).collect::<Vec<_>>(),
            "hoeffding": hoeffding.iter().map(|(b, h)| json!({
                "b": b,
                "max_abs_mean": h.max_abs_mean,
                "max_abs_cross_cov": h.max_abs_cross_cov,
                "max_reconstruction_error": h.max_reconstruction_error,
            })).collect::<Vec<_>>(),
        }),
    )?;
    let summary = UstatSummary {
        kernel: u.kernel.clone(),
        cells: rows.len(),
        all_checks_pass,
        out: out.to_path_buf(),
    };
    Ok((summary, rows))
}

/// Load `--config` and layer the overrides; returns the config and the set
/// of keys the user supplied.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<(RunConfig, BTreeSet<String>), CliError> {
    let file = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::resource(format!("{}: {e}", p.display())))?;
            parse_file(&text)?
        }
        None => Vec::new(),
    };
    let explicit = file.iter().chain(overrides).map(|(k, _)| k.clone()).collect();
    Ok((RunConfig::from_sources(&file, overrides)?, explicit))
}
