//! `pgnoise` — Poisson-Gaussian image-noise modeling from the command line.
//!
//! Subcommands:
//!
//! * `simulate` — draw a noisy image from a clean one under `(a, b, seed)`
//!   and persist the pair losslessly.
//! * `estimate` — recover `(1/a, b^2)` from a clean/noisy pair.
//! * `loglik`   — score a pair under given parameters with the truncated
//!   exact likelihood.
//! * `evaluate` — sweep estimators over images, seeds and `(a, b)` grids,
//!   writing deterministic CSV/JSON reports.
//!
//! Machine-readable results go to stdout as JSON; progress notes go to
//! stderr.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pgnoise::eval::{linear_grid, run_sweep, write_reports, SweepConfig, SweepImage};
use pgnoise::io::{self, ColorMode};
use pgnoise::synthetic::synthetic_image;
use pgnoise::{
    estimate_cumulant, estimate_var, log_likelihood, Estimate, ImageBuffer, ImagePair,
    LikelihoodConfig, Method, NoiseParams, PairMeta, Seed, VarConfig,
};

#[derive(Parser)]
#[command(
    name = "pgnoise",
    version,
    about = "Poisson-Gaussian image-noise modeling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a noisy image from a clean one and save the pair.
    Simulate(SimulateArgs),
    /// Estimate (1/a, b^2) from a clean/noisy pair.
    Estimate(EstimateArgs),
    /// Log-likelihood of a pair under given (a, b).
    Loglik(LoglikArgs),
    /// Run an estimator sweep and write report files.
    Evaluate(EvaluateArgs),
}

/// How to treat color inputs when loading.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliColor {
    /// Fail on color input.
    Reject,
    /// BT.601 luma conversion (default).
    Luma,
    /// Keep only the red channel.
    Red,
    /// Keep only the green channel.
    Green,
    /// Keep only the blue channel.
    Blue,
}

impl CliColor {
    fn mode(self) -> ColorMode {
        match self {
            CliColor::Reject => ColorMode::Reject,
            CliColor::Luma => ColorMode::Luma,
            CliColor::Red => ColorMode::Channel(0),
            CliColor::Green => ColorMode::Channel(1),
            CliColor::Blue => ColorMode::Channel(2),
        }
    }
}

/// Shared loader flags.
#[derive(Args, Debug)]
struct LoadOpts {
    /// Override the normalization divisor with 2^DEPTH - 1 (e.g. for
    /// 12-bit data stored in 16-bit containers).
    #[arg(long, value_name = "DEPTH", global = false)]
    bit_depth: Option<u32>,
    /// Color handling for PNG inputs.
    #[arg(long, value_enum, default_value_t = CliColor::Luma)]
    color: CliColor,
}

impl LoadOpts {
    fn load(&self, path: &Path) -> Result<ImageBuffer> {
        io::load_image_with(path, self.bit_depth, self.color.mode())
            .with_context(|| format!("loading {}", path.display()))
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Clean input image (PGM, PNG, or float container).
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Photon scale a > 0.
    #[arg(long)]
    a: f64,
    /// Read-noise standard deviation b >= 0.
    #[arg(long)]
    b: f64,
    /// RNG seed; the same (image, a, b, seed) always reproduces the same
    /// noisy output.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for clean.pgfl, noisy.pgfl and pair.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    load: LoadOpts,
}

#[derive(Args)]
struct EstimateArgs {
    /// Clean (noise-free) image.
    #[arg(long, value_name = "FILE", required_unless_present = "pair")]
    clean: Option<PathBuf>,
    /// Noisy image registered to the clean one.
    #[arg(long, value_name = "FILE", required_unless_present = "pair")]
    noisy: Option<PathBuf>,
    /// Directory written by `simulate` (alternative to --clean/--noisy).
    #[arg(long, value_name = "DIR", conflicts_with_all = ["clean", "noisy"])]
    pair: Option<PathBuf>,
    /// Which estimator(s) to run.
    #[arg(long, value_enum, default_value_t = CliMethod::Both)]
    method: CliMethod,
    /// Intensity quantization levels for the variance fit.
    #[arg(long, default_value_t = 256)]
    levels: u32,
    /// Give every occupied level equal weight in the variance fit
    /// (default weights levels by pixel count).
    #[arg(long)]
    var_unweighted: bool,
    #[command(flatten)]
    load: LoadOpts,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliMethod {
    Cumulant,
    Var,
    Both,
}

impl CliMethod {
    fn methods(self) -> Vec<Method> {
        match self {
            CliMethod::Cumulant => vec![Method::Cumulant],
            CliMethod::Var => vec![Method::Var],
            CliMethod::Both => vec![Method::Cumulant, Method::Var],
        }
    }
}

#[derive(Args)]
struct LoglikArgs {
    #[arg(long, value_name = "FILE", required_unless_present = "pair")]
    clean: Option<PathBuf>,
    #[arg(long, value_name = "FILE", required_unless_present = "pair")]
    noisy: Option<PathBuf>,
    /// Directory written by `simulate` (alternative to --clean/--noisy).
    #[arg(long, value_name = "DIR", conflicts_with_all = ["clean", "noisy"])]
    pair: Option<PathBuf>,
    /// Photon scale a > 0.
    #[arg(long)]
    a: f64,
    /// Read-noise standard deviation b > 0.
    #[arg(long)]
    b: f64,
    /// Per-pixel bound on neglected Poisson tail mass.
    #[arg(long, default_value_t = 1e-12)]
    tail_mass: f64,
    /// Hard cap on the per-pixel summation index.
    #[arg(long, default_value_t = 10_000)]
    k_cap: usize,
    #[command(flatten)]
    load: LoadOpts,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    /// 5x5 grid over a in [1,100], b in [0.01,0.15]; seeds 0..3.
    Desk,
    /// 25x25 grid over the same ranges; seeds 0..10.
    Paper,
    /// Grids and seed count given explicitly.
    Custom,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Clean input images: files or directories (searched for .pgm, .pgfl,
    /// .png). Repeatable and comma-separable.
    #[arg(long, value_name = "PATH", value_delimiter = ',', num_args = 1..)]
    images: Vec<PathBuf>,
    /// Use N built-in synthetic scenes (481x321) instead of --images.
    #[arg(long, value_name = "N", conflicts_with = "images")]
    synthetic: Option<u32>,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    /// Photon-scale grid as lo:hi:n (required for --profile custom).
    #[arg(long, value_name = "LO:HI:N")]
    a_grid: Option<String>,
    /// Read-noise grid as lo:hi:n (required for --profile custom).
    #[arg(long, value_name = "LO:HI:N")]
    b_grid: Option<String>,
    /// Number of seeds; cells use seeds 0..N.
    #[arg(long, value_name = "N")]
    seeds: Option<u64>,
    /// Comma-separated list: cumulant,var.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    /// Also compute relative log-likelihood gaps (slower).
    #[arg(long)]
    with_ll: bool,
    /// Per-pixel bound on neglected Poisson tail mass for --with-ll.
    #[arg(long, default_value_t = 1e-12)]
    tail_mass: f64,
    /// Intensity quantization levels for the variance fit.
    #[arg(long, default_value_t = 256)]
    levels: u32,
    /// Equal-weight occupied levels in the variance fit.
    #[arg(long)]
    var_unweighted: bool,
    /// Worker threads (default: one per CPU).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Report directory; records.csv, summary.json, bias.csv and
    /// per_image.csv are written here.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    load: LoadOpts,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_str(s)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Estimate(args) => estimate(args),
        Command::Loglik(args) => loglik(args),
        Command::Evaluate(args) => evaluate(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let clean = args.load.load(&args.input)?;
    let params = NoiseParams::new(args.a, args.b)?;
    let pair = pgnoise::synthesize(&clean, params, Seed(args.seed))?;
    // Stamp the provenance of the clean half into the sidecar.
    let meta = PairMeta {
        source: Some(args.input.display().to_string()),
        ..pair.meta().clone()
    };
    let pair = ImagePair::new(pair.clean().clone(), pair.noisy().clone(), meta)?;
    io::save_pair(&pair, &args.out)?;
    let report = serde_json::json!({
        "out": args.out,
        "width": clean.width(),
        "height": clean.height(),
        "a": args.a,
        "b": args.b,
        "seed": args.seed,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Loads the two halves either from an explicit file pair or a `simulate`
/// output directory.
fn load_halves(
    clean: &Option<PathBuf>,
    noisy: &Option<PathBuf>,
    pair: &Option<PathBuf>,
    load: &LoadOpts,
) -> Result<ImagePair> {
    if let Some(dir) = pair {
        return Ok(io::load_pair(dir)?);
    }
    let clean = load.load(clean.as_ref().expect("clap enforces presence"))?;
    let noisy = load.load(noisy.as_ref().expect("clap enforces presence"))?;
    Ok(ImagePair::new(clean, noisy, PairMeta::default())?)
}

fn estimate_json(est: &Estimate) -> serde_json::Value {
    serde_json::json!({
        "a_inv": est.a_inv,
        "b_sq": est.b_sq,
        "a": est.a(),
        "b": est.b(),
        "diagnostics": est.diagnostics,
    })
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let pair = load_halves(&args.clean, &args.noisy, &args.pair, &args.load)?;
    let var_cfg = VarConfig {
        levels: args.levels,
        weighted: !args.var_unweighted,
    };
    let mut out = serde_json::Map::new();
    let mut failures = 0;
    for method in args.method.methods() {
        let result = match method {
            Method::Cumulant => estimate_cumulant(&pair),
            Method::Var => estimate_var(&pair, &var_cfg),
        };
        let value = match result {
            Ok(est) => estimate_json(&est),
            Err(e) => {
                failures += 1;
                serde_json::json!({ "error": e.to_string() })
            }
        };
        out.insert(method.name().to_string(), value);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(out))?
    );
    if failures > 0 {
        bail!("{failures} estimator(s) failed");
    }
    Ok(())
}

fn loglik(args: LoglikArgs) -> Result<()> {
    let pair = load_halves(&args.clean, &args.noisy, &args.pair, &args.load)?;
    let params = NoiseParams::new(args.a, args.b)?;
    let cfg = LikelihoodConfig::new(args.tail_mass, args.k_cap)?;
    let ll = log_likelihood(&pair, params, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&ll)?);
    Ok(())
}

/// Parses `lo:hi:n` into an inclusive linear grid.
fn parse_grid(spec: &str, flag: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        bail!("--{flag} expects lo:hi:n, got {spec:?}");
    };
    let lo: f64 = lo
        .parse()
        .with_context(|| format!("--{flag} lower bound"))?;
    let hi: f64 = hi
        .parse()
        .with_context(|| format!("--{flag} upper bound"))?;
    let n: usize = n.parse().with_context(|| format!("--{flag} point count"))?;
    if n == 0 {
        bail!("--{flag} needs at least one point");
    }
    Ok(linear_grid(lo, hi, n))
}

/// Image files a directory contributes to a sweep, in name order.
fn collect_from_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm" | "pgfl" | "png")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn gather_images(args: &EvaluateArgs) -> Result<Vec<SweepImage>> {
    if let Some(n) = args.synthetic {
        if n == 0 {
            bail!("--synthetic needs at least one scene");
        }
        return Ok((0..n)
            .map(|i| SweepImage {
                id: format!("synthetic-{i}"),
                clean: synthetic_image(481, 321, 1000 + i as u64).expect("nonzero dims"),
            })
            .collect());
    }
    if args.images.is_empty() {
        bail!("pass --images <files|dirs> or --synthetic <n>");
    }
    let mut paths = Vec::new();
    for p in &args.images {
        if p.is_dir() {
            paths.extend(collect_from_dir(p)?);
        } else {
            paths.push(p.clone());
        }
    }
    if paths.is_empty() {
        bail!("no usable images found (looked for .pgm, .pgfl, .png)");
    }
    let mut images = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for path in paths {
        let clean = args.load.load(&path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .replace([',', '"', '\n', '\r'], "_");
        // Disambiguate duplicate stems from different directories.
        let mut id = stem.clone();
        let mut k = 1;
        while !seen.insert(id.clone()) {
            id = format!("{stem}-{k}");
            k += 1;
        }
        images.push(SweepImage { id, clean });
    }
    Ok(images)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let images = gather_images(&args)?;
    let mut cfg = match args.profile {
        Profile::Desk => SweepConfig::desk(images),
        Profile::Paper => SweepConfig::paper(images),
        Profile::Custom => {
            if args.a_grid.is_none() || args.b_grid.is_none() || args.seeds.is_none() {
                bail!("--profile custom requires --a-grid, --b-grid and --seeds");
            }
            SweepConfig::desk(images)
        }
    };
    if let Some(spec) = &args.a_grid {
        cfg.a_values = parse_grid(spec, "a-grid")?;
    }
    if let Some(spec) = &args.b_grid {
        cfg.b_values = parse_grid(spec, "b-grid")?;
    }
    if let Some(n) = args.seeds {
        if n == 0 {
            bail!("--seeds needs at least one seed");
        }
        cfg.seeds = (0..n).collect();
    }
    if !args.methods.is_empty() {
        cfg.methods = args.methods.clone();
    }
    cfg.with_ll = args.with_ll;
    cfg.ll_config = LikelihoodConfig::new(args.tail_mass, 10_000)?;
    cfg.var_levels = args.levels;
    cfg.var_weighted = !args.var_unweighted;
    cfg.workers = args.workers;

    eprintln!(
        "sweep: {} image(s) x {} seed(s) x {} x {} grid = {} cells",
        cfg.images.len(),
        cfg.seeds.len(),
        cfg.a_values.len(),
        cfg.b_values.len(),
        cfg.cell_count()
    );
    let started = std::time::Instant::now();
    let records = run_sweep(&cfg)?;
    write_reports(&records, &cfg, &args.out)?;
    eprintln!(
        "wrote {} records to {} in {:.1?}",
        records.len(),
        args.out.display(),
        started.elapsed()
    );
    let report = serde_json::json!({
        "out": args.out,
        "cells": records.len(),
        "reports": ["records.csv", "summary.json", "bias.csv", "per_image.csv"],
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
