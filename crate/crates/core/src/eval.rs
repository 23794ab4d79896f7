//! Batch evaluation of the estimators over parameter sweeps.
//!
//! A sweep takes a set of clean images, a seed list, and grids of `(a, b)`
//! values. Every `(image, seed, a, b)` cell synthesizes a noisy image,
//! runs the requested estimators, and records squared errors of the
//! estimated `(1/a, b^2)` against the truth — optionally with the relative
//! log-likelihood gap of each estimate.
//!
//! Cells are independent and deterministic, so the sweep runs them in
//! parallel while keeping the canonical `(image, seed, a, b)` output
//! order. The same configuration therefore produces byte-identical report
//! files no matter how many worker threads are used.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::buffer::ImageBuffer;
use crate::error::{Error, Result};
use crate::estimators::{estimate_cumulant, estimate_var, Estimate, Method, VarConfig};
use crate::likelihood::{log_likelihood, relative_gap, LikelihoodConfig};
use crate::sim::{synthesize, NoiseParams, Seed};
use crate::stats::{iqr_keep_mask, summarize_values, StatSummary};

/// A clean image with a stable identifier for report rows.
#[derive(Debug, Clone)]
pub struct SweepImage {
    /// Identifier written to reports; must be non-empty and free of
    /// commas, quotes and line breaks.
    pub id: String,
    pub clean: ImageBuffer,
}

/// Full description of a sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub images: Vec<SweepImage>,
    pub seeds: Vec<u64>,
    /// Photon-scale grid (all strictly positive).
    pub a_values: Vec<f64>,
    /// Read-noise grid (all strictly positive).
    pub b_values: Vec<f64>,
    /// Estimators to run per cell.
    pub methods: Vec<Method>,
    /// Quantization levels for the variance-fit estimator.
    pub var_levels: u32,
    /// Weight variance-fit levels by pixel count.
    pub var_weighted: bool,
    /// Also compute the relative log-likelihood gap per estimate
    /// (significantly more expensive).
    pub with_ll: bool,
    pub ll_config: LikelihoodConfig,
    /// Worker-thread count; `None` uses the process default pool.
    pub workers: Option<usize>,
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl SweepConfig {
    /// Quick profile: 5 x 5 grid over `a` in `[1, 100]` and `b` in
    /// `[0.01, 0.15]`, seeds 0..3, both estimators, no likelihood gaps.
    pub fn desk(images: Vec<SweepImage>) -> Self {
        SweepConfig {
            images,
            seeds: (0..3).collect(),
            a_values: linear_grid(1.0, 100.0, 5),
            b_values: linear_grid(0.01, 0.15, 5),
            methods: vec![Method::Cumulant, Method::Var],
            var_levels: 256,
            var_weighted: true,
            with_ll: false,
            ll_config: LikelihoodConfig::default(),
            workers: None,
        }
    }

    /// Dense profile: 25 x 25 grid over the same ranges, seeds 0..10.
    pub fn paper(images: Vec<SweepImage>) -> Self {
        SweepConfig {
            a_values: linear_grid(1.0, 100.0, 25),
            b_values: linear_grid(0.01, 0.15, 25),
            seeds: (0..10).collect(),
            ..Self::desk(images)
        }
    }

    fn var_config(&self) -> VarConfig {
        VarConfig {
            levels: self.var_levels,
            weighted: self.var_weighted,
        }
    }

    /// Total number of cells the sweep will run.
    pub fn cell_count(&self) -> usize {
        self.images.len() * self.seeds.len() * self.a_values.len() * self.b_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidSweepConfig { reason });
        if self.images.is_empty() {
            return fail("no images".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for img in &self.images {
            if img.id.is_empty() || img.id.contains([',', '"', '\n', '\r']) {
                return fail(format!("image id {:?} is empty or not report-safe", img.id));
            }
            if !ids.insert(img.id.as_str()) {
                return fail(format!("duplicate image id {:?}", img.id));
            }
            img.clean.check_clean_range()?;
        }
        if self.seeds.is_empty() {
            return fail("no seeds".into());
        }
        for (name, grid) in [("a", &self.a_values), ("b", &self.b_values)] {
            if grid.is_empty() {
                return fail(format!("empty {name} grid"));
            }
            if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return fail(format!("{name} grid value {v} is not a positive number"));
            }
        }
        if self.methods.is_empty() {
            return fail("no methods".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.methods.iter().all(|m| seen.insert(m.name())) {
            return fail("duplicate method".into());
        }
        if self.var_levels < 2 {
            return fail(format!("var_levels must be >= 2, got {}", self.var_levels));
        }
        if self.workers == Some(0) {
            return fail("workers must be >= 1 when set".into());
        }
        LikelihoodConfig::new(self.ll_config.tail_mass, self.ll_config.k_cap)?;
        Ok(())
    }
}

/// Successful per-method result for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRecord {
    pub a_inv_hat: f64,
    pub b_sq_hat: f64,
    /// `(a_inv_hat - 1/a_true)^2`.
    pub sq_err_a_inv: f64,
    /// `(b_sq_hat - b_true^2)^2`.
    pub sq_err_b_sq: f64,
    pub clamped_a_inv: bool,
    pub clamped_b_sq: bool,
    /// Relative log-likelihood gap versus the true parameters, when the
    /// sweep asked for it and the estimate was invertible.
    pub ll_gap: Option<f64>,
}

/// Outcome of one estimator on one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodCell {
    Ok(MethodRecord),
    /// The estimator reported an error (e.g. no real root); the message is
    /// kept for programmatic inspection.
    Failed(String),
}

impl MethodCell {
    pub fn record(&self) -> Option<&MethodRecord> {
        match self {
            MethodCell::Ok(r) => Some(r),
            MethodCell::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&str> {
        match self {
            MethodCell::Ok(_) => None,
            MethodCell::Failed(reason) => Some(reason),
        }
    }
}

/// One sweep cell: ground truth plus per-method outcomes (`None` when the
/// method was not requested).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub image_id: String,
    pub seed: u64,
    pub a_true: f64,
    pub b_true: f64,
    pub cumulant: Option<MethodCell>,
    pub var: Option<MethodCell>,
}

impl EvalRecord {
    pub fn cell(&self, method: Method) -> Option<&MethodCell> {
        match method {
            Method::Cumulant => self.cumulant.as_ref(),
            Method::Var => self.var.as_ref(),
        }
    }
}

/// Which estimated parameter a summary or filter refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    AInv,
    BSq,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::AInv => "a_inv",
            Param::BSq => "b_sq",
        }
    }

    fn sq_err(&self, r: &MethodRecord) -> f64 {
        match self {
            Param::AInv => r.sq_err_a_inv,
            Param::BSq => r.sq_err_b_sq,
        }
    }
}

/// Runs every `(image, seed, a, b)` cell and returns records in canonical
/// order: images outermost, then seeds, then `a`, then `b`.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<EvalRecord>> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.cell_count());
    for img in &config.images {
        for &seed in &config.seeds {
            for &a in &config.a_values {
                for &b in &config.b_values {
                    cells.push((img, seed, a, b));
                }
            }
        }
    }
    let work = || {
        cells
            .par_iter()
            .map(|&(img, seed, a, b)| evaluate_cell(config, img, seed, a, b))
            .collect::<Vec<_>>()
    };
    let records = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidSweepConfig {
                reason: format!("worker pool: {e}"),
            })?
            .install(work),
        None => work(),
    };
    Ok(records)
}

fn evaluate_cell(config: &SweepConfig, img: &SweepImage, seed: u64, a: f64, b: f64) -> EvalRecord {
    let wants = |m: Method| config.methods.contains(&m);
    let mut record = EvalRecord {
        image_id: img.id.clone(),
        seed,
        a_true: a,
        b_true: b,
        cumulant: None,
        var: None,
    };

    let synth = NoiseParams::new(a, b).and_then(|p| synthesize(&img.clean, p, Seed(seed)));
    let pair = match synth {
        Ok(pair) => pair,
        Err(e) => {
            // Nothing can run without the pair; mark every requested
            // method as failed rather than aborting the whole sweep.
            let failed = MethodCell::Failed(format!("synthesis: {e}"));
            record.cumulant = wants(Method::Cumulant).then(|| failed.clone());
            record.var = wants(Method::Var).then_some(failed);
            return record;
        }
    };

    let true_params = pair.meta().params.expect("synthesize stores the params");
    let ll_true = if config.with_ll {
        log_likelihood(&pair, true_params, &config.ll_config)
            .ok()
            .map(|l| l.ll)
    } else {
        None
    };

    let finish = |est: crate::error::Result<Estimate>| -> MethodCell {
        match est {
            Ok(est) => {
                let a_inv_true = 1.0 / a;
                let b_sq_true = b * b;
                let ll_gap = ll_true.and_then(|ll_ref| {
                    let params = est.params().ok()?;
                    let ll_est = log_likelihood(&pair, params, &config.ll_config).ok()?.ll;
                    relative_gap(ll_est, ll_ref).ok()
                });
                MethodCell::Ok(MethodRecord {
                    a_inv_hat: est.a_inv,
                    b_sq_hat: est.b_sq,
                    sq_err_a_inv: (est.a_inv - a_inv_true) * (est.a_inv - a_inv_true),
                    sq_err_b_sq: (est.b_sq - b_sq_true) * (est.b_sq - b_sq_true),
                    clamped_a_inv: est.diagnostics.clamped_a_inv,
                    clamped_b_sq: est.diagnostics.clamped_b_sq,
                    ll_gap,
                })
            }
            Err(e) => MethodCell::Failed(e.to_string()),
        }
    };

    if wants(Method::Cumulant) {
        record.cumulant = Some(finish(estimate_cumulant(&pair)));
    }
    if wants(Method::Var) {
        record.var = Some(finish(estimate_var(&pair, &config.var_config())));
    }
    record
}

/// Squared errors of successful cells for one method and parameter, in
/// record order.
fn successful_sq_errs(records: &[EvalRecord], method: Method, param: Param) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| r.cell(method).and_then(MethodCell::record))
        .map(|r| param.sq_err(r))
        .collect()
}

/// Distribution summary of the squared errors of one method and parameter,
/// over successful cells only.
pub fn summarize(records: &[EvalRecord], method: Method, param: Param) -> Result<StatSummary> {
    summarize_values(&successful_sq_errs(records, method, param))
}

/// Which squared errors an outlier fence applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierRule {
    /// Fence on a single parameter's squared errors.
    Single(Param),
    /// Keep a cell only if it passes the fences of both parameters.
    Combined,
}

/// Drops outlier cells by the interquartile fence on squared errors.
/// Returns the kept records and the kept fraction. Failed cells are
/// excluded from both the numerator and the denominator.
pub fn filter_outliers(
    records: &[EvalRecord],
    method: Method,
    rule: OutlierRule,
) -> Result<(Vec<EvalRecord>, f64)> {
    let successes: Vec<(usize, &MethodRecord)> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.cell(method).and_then(MethodCell::record).map(|m| (i, m)))
        .collect();
    if successes.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mask_for = |param: Param| -> Result<Vec<bool>> {
        let errs: Vec<f64> = successes.iter().map(|(_, m)| param.sq_err(m)).collect();
        iqr_keep_mask(&errs)
    };
    let keep: Vec<bool> = match rule {
        OutlierRule::Single(param) => mask_for(param)?,
        OutlierRule::Combined => {
            let a = mask_for(Param::AInv)?;
            let b = mask_for(Param::BSq)?;
            a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
        }
    };
    let kept: Vec<EvalRecord> = successes
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|((i, _), _)| records[*i].clone())
        .collect();
    let fraction = kept.len() as f64 / successes.len() as f64;
    Ok((kept, fraction))
}

/// Mean signed estimation errors at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    /// The grid value the cells share (`a_true` or `b_true`).
    pub value: f64,
    /// Mean of `a_inv_hat - 1/a_true`.
    pub bias_a_inv: f64,
    /// Mean of `b_sq_hat - b_true^2`.
    pub bias_b_sq: f64,
    /// Number of successful cells behind the means.
    pub count: usize,
}

/// Signed bias grouped along each swept axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurves {
    /// Rows grouped by `a_true`, ascending.
    pub vs_a: Vec<BiasRow>,
    /// Rows grouped by `b_true`, ascending.
    pub vs_b: Vec<BiasRow>,
}

/// Mean signed errors of one method along each swept parameter axis,
/// over successful cells.
pub fn bias_curves(records: &[EvalRecord], method: Method) -> Result<BiasCurves> {
    let axis = |key: fn(&EvalRecord) -> f64| -> Vec<BiasRow> {
        // Positive finite keys sort correctly by their IEEE bit patterns.
        let mut groups: BTreeMap<
            u64,
            (f64, crate::kahan::KahanSum, crate::kahan::KahanSum, usize),
        > = BTreeMap::new();
        for r in records {
            let Some(m) = r.cell(method).and_then(MethodCell::record) else {
                continue;
            };
            let value = key(r);
            let entry = groups.entry(value.to_bits()).or_insert_with(|| {
                (
                    value,
                    crate::kahan::KahanSum::new(),
                    crate::kahan::KahanSum::new(),
                    0,
                )
            });
            entry.1.add(m.a_inv_hat - 1.0 / r.a_true);
            entry.2.add(m.b_sq_hat - r.b_true * r.b_true);
            entry.3 += 1;
        }
        groups
            .into_values()
            .map(|(value, sa, sb, count)| BiasRow {
                value,
                bias_a_inv: sa.value() / count as f64,
                bias_b_sq: sb.value() / count as f64,
                count,
            })
            .collect()
    };
    let vs_a = axis(|r| r.a_true);
    let vs_b = axis(|r| r.b_true);
    if vs_a.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(BiasCurves { vs_a, vs_b })
}

/// Per-image accuracy, with and without outlier filtering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerImageMse {
    pub image_id: String,
    /// Successful cells for this image.
    pub count: usize,
    /// Cells surviving the pooled combined fence.
    pub count_kept: usize,
    pub mse_a_inv: f64,
    pub mse_b_sq: f64,
    /// `None` when the fence kept nothing for this image.
    pub mse_a_inv_filtered: Option<f64>,
    pub mse_b_sq_filtered: Option<f64>,
}

/// Per-image mean squared errors for one method. The outlier fence is
/// computed once over the pooled squared errors (combined rule), so every
/// image is judged against the same cut.
pub fn per_image_mse(records: &[EvalRecord], method: Method) -> Result<Vec<PerImageMse>> {
    let (kept, _) = filter_outliers(records, method, OutlierRule::Combined)?;
    let mean = |vals: &[f64]| -> Option<f64> {
        if vals.is_empty() {
            return None;
        }
        Some(crate::kahan::sum(vals) / vals.len() as f64)
    };
    // BTreeMap keyed by id keeps the report order stable.
    let mut order: Vec<&str> = Vec::new();
    let mut all: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let Some(m) = r.cell(method).and_then(MethodCell::record) else {
            continue;
        };
        if !all.contains_key(r.image_id.as_str()) {
            order.push(&r.image_id);
        }
        let entry = all.entry(&r.image_id).or_default();
        entry.0.push(m.sq_err_a_inv);
        entry.1.push(m.sq_err_b_sq);
    }
    let mut filtered: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &kept {
        let m = r
            .cell(method)
            .and_then(MethodCell::record)
            .expect("kept records succeeded");
        let entry = filtered.entry(&r.image_id).or_default();
        entry.0.push(m.sq_err_a_inv);
        entry.1.push(m.sq_err_b_sq);
    }
    let rows = order
        .into_iter()
        .map(|id| {
            let (ea, eb) = &all[id];
            let empty = (Vec::new(), Vec::new());
            let (fa, fb) = filtered.get(id).unwrap_or(&empty);
            PerImageMse {
                image_id: id.to_string(),
                count: ea.len(),
                count_kept: fa.len(),
                mse_a_inv: mean(ea).expect("group is non-empty"),
                mse_b_sq: mean(eb).expect("group is non-empty"),
                mse_a_inv_filtered: mean(fa),
                mse_b_sq_filtered: mean(fb),
            }
        })
        .collect();
    Ok(rows)
}

// ---- report files ----

fn fmt_f64(v: f64) -> String {
    // f64's Display prints the shortest digits that round-trip, which is
    // platform-independent — report bytes stay reproducible.
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Renders the per-cell table. One row per cell; per-method column groups
/// `<m>_status` (`ok`, `failed`, or `skipped`), the estimates, their
/// squared errors, clamp flags, and the optional likelihood gap.
pub fn records_csv_string(records: &[EvalRecord]) -> String {
    let mut out = String::new();
    out.push_str("image_id,seed,a_true,b_true");
    for m in [Method::Cumulant, Method::Var] {
        for col in [
            "status",
            "a_inv",
            "b_sq",
            "sq_err_a_inv",
            "sq_err_b_sq",
            "clamped_a_inv",
            "clamped_b_sq",
            "ll_gap",
        ] {
            out.push_str(&format!(",{m}_{col}"));
        }
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}",
            r.image_id,
            r.seed,
            fmt_f64(r.a_true),
            fmt_f64(r.b_true)
        ));
        for cell in [&r.cumulant, &r.var] {
            match cell {
                None => out.push_str(",skipped,,,,,,,"),
                Some(MethodCell::Failed(_)) => out.push_str(",failed,,,,,,,"),
                Some(MethodCell::Ok(m)) => {
                    out.push_str(&format!(
                        ",ok,{},{},{},{},{},{},{}",
                        fmt_f64(m.a_inv_hat),
                        fmt_f64(m.b_sq_hat),
                        fmt_f64(m.sq_err_a_inv),
                        fmt_f64(m.sq_err_b_sq),
                        m.clamped_a_inv,
                        m.clamped_b_sq,
                        fmt_opt(m.ll_gap)
                    ));
                }
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct ConfigEcho {
    image_ids: Vec<String>,
    image_sizes: Vec<(u32, u32)>,
    seeds: Vec<u64>,
    a_values: Vec<f64>,
    b_values: Vec<f64>,
    methods: Vec<String>,
    var_levels: u32,
    var_weighted: bool,
    with_ll: bool,
    ll_tail_mass: f64,
    ll_k_cap: usize,
}

/// Aggregates for one method in `summary.json`.
#[derive(Debug, Serialize)]
struct MethodSummary {
    cells: usize,
    failures: usize,
    sq_err_a_inv: Option<StatSummary>,
    sq_err_b_sq: Option<StatSummary>,
    filtered_sq_err_a_inv: Option<StatSummary>,
    filtered_sq_err_b_sq: Option<StatSummary>,
    kept_fraction_a_inv: Option<f64>,
    kept_fraction_b_sq: Option<f64>,
    kept_fraction_combined: Option<f64>,
    ll_gap: Option<StatSummary>,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    config: ConfigEcho,
    methods: BTreeMap<String, MethodSummary>,
}

fn method_summary(records: &[EvalRecord], method: Method) -> MethodSummary {
    let cells = records.iter().filter(|r| r.cell(method).is_some()).count();
    let failures = records
        .iter()
        .filter(|r| matches!(r.cell(method), Some(MethodCell::Failed(_))))
        .count();
    let summary_of = |param: Param| summarize(records, method, param).ok();
    let filtered = filter_outliers(records, method, OutlierRule::Combined).ok();
    let filtered_summary = |param: Param| {
        filtered
            .as_ref()
            .and_then(|(kept, _)| summarize(kept, method, param).ok())
    };
    let kept_fraction =
        |rule: OutlierRule| filter_outliers(records, method, rule).ok().map(|(_, f)| f);
    let gaps: Vec<f64> = records
        .iter()
        .filter_map(|r| r.cell(method).and_then(MethodCell::record))
        .filter_map(|m| m.ll_gap)
        .collect();
    MethodSummary {
        cells,
        failures,
        sq_err_a_inv: summary_of(Param::AInv),
        sq_err_b_sq: summary_of(Param::BSq),
        filtered_sq_err_a_inv: filtered_summary(Param::AInv),
        filtered_sq_err_b_sq: filtered_summary(Param::BSq),
        kept_fraction_a_inv: kept_fraction(OutlierRule::Single(Param::AInv)),
        kept_fraction_b_sq: kept_fraction(OutlierRule::Single(Param::BSq)),
        kept_fraction_combined: filtered.map(|(_, f)| f),
        ll_gap: summarize_values(&gaps).ok(),
    }
}

/// Renders `summary.json`: the configuration echo plus per-method
/// aggregates (raw and outlier-filtered squared-error summaries, kept
/// fractions, failure counts, likelihood-gap summary when present).
pub fn summary_json_string(records: &[EvalRecord], config: &SweepConfig) -> String {
    let echo = ConfigEcho {
        image_ids: config.images.iter().map(|i| i.id.clone()).collect(),
        image_sizes: config
            .images
            .iter()
            .map(|i| (i.clean.width(), i.clean.height()))
            .collect(),
        seeds: config.seeds.clone(),
        a_values: config.a_values.clone(),
        b_values: config.b_values.clone(),
        methods: config
            .methods
            .iter()
            .map(|m| m.name().to_string())
            .collect(),
        var_levels: config.var_levels,
        var_weighted: config.var_weighted,
        with_ll: config.with_ll,
        ll_tail_mass: config.ll_config.tail_mass,
        ll_k_cap: config.ll_config.k_cap,
    };
    let mut methods = BTreeMap::new();
    for &m in &config.methods {
        methods.insert(m.name().to_string(), method_summary(records, m));
    }
    let summary = SweepSummary {
        config: echo,
        methods,
    };
    serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
}

/// Renders `bias.csv`: signed bias along each swept axis, per method.
pub fn bias_csv_string(records: &[EvalRecord], config: &SweepConfig) -> String {
    let mut out = String::from("method,axis,value,bias_a_inv,bias_b_sq,count\n");
    for &m in &config.methods {
        let Ok(curves) = bias_curves(records, m) else {
            continue;
        };
        for (axis, rows) in [("a", &curves.vs_a), ("b", &curves.vs_b)] {
            for row in rows {
                out.push_str(&format!(
                    "{m},{axis},{},{},{},{}\n",
                    fmt_f64(row.value),
                    fmt_f64(row.bias_a_inv),
                    fmt_f64(row.bias_b_sq),
                    row.count
                ));
            }
        }
    }
    out
}

/// Renders `per_image.csv`: per-image mean squared errors, raw and under
/// the pooled combined fence, per method.
pub fn per_image_csv_string(records: &[EvalRecord], config: &SweepConfig) -> String {
    let mut out = String::from(
        "method,image_id,count,count_kept,mse_a_inv,mse_b_sq,mse_a_inv_filtered,mse_b_sq_filtered\n",
    );
    for &m in &config.methods {
        let Ok(rows) = per_image_mse(records, m) else {
            continue;
        };
        for row in rows {
            out.push_str(&format!(
                "{m},{},{},{},{},{},{},{}\n",
                row.image_id,
                row.count,
                row.count_kept,
                fmt_f64(row.mse_a_inv),
                fmt_f64(row.mse_b_sq),
                fmt_opt(row.mse_a_inv_filtered),
                fmt_opt(row.mse_b_sq_filtered)
            ));
        }
    }
    out
}

/// Writes `records.csv`, `summary.json`, `bias.csv` and `per_image.csv`
/// into `dir` (created if needed). Output bytes depend only on the records
/// and configuration, not on thread scheduling.
pub fn write_reports(
    records: &[EvalRecord],
    config: &SweepConfig,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("records.csv", records_csv_string(records)),
        ("summary.json", summary_json_string(records, config)),
        ("bias.csv", bias_csv_string(records, config)),
        ("per_image.csv", per_image_csv_string(records, config)),
    ];
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
