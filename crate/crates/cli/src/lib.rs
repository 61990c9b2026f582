//! `simweight` command line: simulate, weigh, grid, bootstrap.

pub mod config;
pub mod error;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use simweight::bootstrap::{evaluate_target, BootstrapOptions, BootstrapReport, Loss};
use simweight::harness::{run_grid, write_results_csv, GridSpec};
use simweight::io::{read_dataset, write_dataset, write_weighted_sample};
use simweight::scm::{make_shift_vector, simulate, ScenarioKind, ScenarioSpec, Similarity};
use simweight::weights::{build_weighted_sample, WeightScheme, WeightingOptions};
use simweight::Dataset;

pub use config::{expand_args, parse_config, CONFIG_ENV};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "simweight", version, about = "Similarity-based weighting of external subgroup data")]
pub struct Cli {
    /// Flat key=value file with default flag values (flags win).
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from the structural causal model.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Compute per-row weights of external subgroups for one target subgroup.
    #[command(args_override_self = true)]
    Weigh(WeighArgs),
    /// Run the simulation grid and summarize it.
    #[command(args_override_self = true)]
    Grid(GridArgs),
    /// .632+ bootstrap of weighted, global and local models.
    #[command(args_override_self = true)]
    Bootstrap(BootstrapArgs),
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// covariate, outcome or covariate-outcome.
    #[arg(long, default_value = "covariate")]
    pub scenario: ScenarioKind,
    /// Number of external subgroups (at least 1).
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub externals: u64,
    /// similar (max shift 1), medium (2) or dissimilar (3).
    #[arg(long, default_value = "similar")]
    pub similarity: Similarity,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u64).range(1..))]
    pub target_n: u64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub external_n: u64,
    /// Subgroup-specific covariates.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Global covariates.
    #[arg(long, default_value_t = 1)]
    pub c: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Adjusted,
    POnly,
}

impl From<SchemeArg> for WeightScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Adjusted => WeightScheme::Adjusted,
            SchemeArg::POnly => WeightScheme::PropensityOnly,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct WeighArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Label of the target subgroup.
    #[arg(long)]
    pub target: String,
    /// Zero external weights whose score falls below this percentile of
    /// the target scores (0-100). Off by default.
    #[arg(long)]
    pub truncate_pct: Option<f64>,
    #[arg(long, value_enum, default_value = "adjusted")]
    pub scheme: SchemeArg,
    /// Ridge penalty on the propensity slopes.
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Weighted-sample CSV (subgroup, weight, y, covariates); `-` for stdout.
    #[arg(long, default_value = "weights.csv")]
    pub out: PathBuf,
    /// Diagnostics JSON; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub diagnostics: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Reduced,
    Full,
}

#[derive(Debug, clap::Args)]
pub struct GridArgs {
    /// Base design; the list flags below replace its entries.
    #[arg(long, value_enum, default_value = "reduced")]
    pub preset: Preset,
    /// Comma-separated scenario kinds.
    #[arg(long)]
    pub kinds: Option<String>,
    /// Comma-separated similarity levels.
    #[arg(long)]
    pub similarities: Option<String>,
    #[arg(long)]
    pub external_counts: Option<String>,
    #[arg(long)]
    pub external_sizes: Option<String>,
    #[arg(long)]
    pub target_sizes: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Size of the held-out target test set per cell.
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; 0 = all available processors.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub truncate_pct: Option<f64>,
    /// Per-cell results CSV.
    #[arg(long, default_value = "grid_results.csv")]
    pub out: PathBuf,
    /// Summary JSON; `-` for stdout.
    #[arg(long, default_value = "-")]
    pub summary: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Target subgroup label, or `all` to evaluate every subgroup in turn.
    #[arg(long, default_value = "all")]
    pub target: String,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: u64,
    /// absolute or squared.
    #[arg(long, default_value = "absolute")]
    pub loss: Loss,
    /// Box-Cox lambda applied to the outcome before fitting; 2 squares it.
    #[arg(long)]
    pub boxcox_lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub truncate_pct: Option<f64>,
    /// Writes PREFIX_report.json, PREFIX_observations.csv and PREFIX_cdf.csv.
    #[arg(long, default_value = "bootstrap")]
    pub out_prefix: String,
}

fn create(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdout().lock()));
    }
    let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    read_dataset(io::BufReader::new(file)).map_err(|e| CliError::core(path.display().to_string(), e))
}

fn weighting(truncate_pct: Option<f64>, scheme: WeightScheme, ridge: Option<f64>) -> Result<WeightingOptions, CliError> {
    if let Some(p) = truncate_pct {
        if !(0.0..=100.0).contains(&p) {
            return Err(CliError::Usage(format!("--truncate-pct must lie in [0, 100], got {p}")));
        }
    }
    let mut options = WeightingOptions { scheme, truncation_percentile: truncate_pct, ..Default::default() };
    if let Some(r) = ridge {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(CliError::Usage(format!("--ridge must be finite and non-negative, got {r}")));
        }
        options.logistic.ridge = r;
    }
    Ok(options)
}

/// Returns the shift vector used, so callers can report it.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<f64>, CliError> {
    let shifts = make_shift_vector(args.externals as usize, args.similarity).map_err(|e| CliError::core("simulate", e))?;
    let mut sizes = vec![args.external_n as usize; shifts.len()];
    sizes[0] = args.target_n as usize;
    let spec = ScenarioSpec::new(args.scenario, shifts.clone(), sizes, args.k as usize, args.c as usize, args.seed);
    let sim = simulate(&spec).map_err(|e| CliError::core("simulate", e))?;
    let mut out = create(&args.out)?;
    write_dataset(&sim.data, &mut out).map_err(|e| CliError::core("writing simulated data", e))?;
    out.flush()?;
    Ok(shifts)
}

#[derive(Debug, Serialize)]
pub struct ExternalDiagnostics {
    pub label: String,
    pub n_rows: usize,
    pub auc: Option<f64>,
    pub mean_weight: f64,
    pub truncation_threshold: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct WeighDiagnostics {
    pub target: String,
    pub n_target: usize,
    pub scheme: WeightScheme,
    pub truncation_percentile: Option<f64>,
    pub ess: f64,
    pub ess_ratio: f64,
    pub externals: Vec<ExternalDiagnostics>,
}

pub fn cmd_weigh(args: &WeighArgs) -> Result<WeighDiagnostics, CliError> {
    let options = weighting(args.truncate_pct, args.scheme.into(), Some(args.ridge))?;
    let data = load(&args.input)?;
    let labels = data.subgroup_labels();
    if labels.len() < 2 {
        return Err(CliError::core(
            "weigh",
            simweight::Error::Data {
                row: 0,
                column: simweight::io::SUBGROUP_COLUMN.into(),
                message: format!("no external subgroups besides the target; available subgroups: {labels:?}"),
            },
        ));
    }
    let (target, externals) = data.split_target(&args.target).map_err(|e| CliError::core("weigh", e))?;
    let sample = build_weighted_sample(&target, &externals, &options).map_err(|e| CliError::core("weigh", e))?;
    let mut out = create(&args.out)?;
    write_weighted_sample(&sample, &mut out).map_err(|e| CliError::core("writing weights", e))?;
    out.flush()?;
    let diagnostics = WeighDiagnostics {
        target: args.target.clone(),
        n_target: sample.n_target,
        scheme: sample.scheme,
        truncation_percentile: sample.truncation_percentile,
        ess: sample.ess,
        ess_ratio: sample.ess_ratio,
        externals: sample
            .externals
            .iter()
            .map(|e| ExternalDiagnostics {
                label: e.label.clone(),
                n_rows: e.n_rows,
                auc: e.comparison.as_ref().map(|c| c.auc),
                mean_weight: e.mean_weight,
                truncation_threshold: e.truncation_threshold.filter(|t| t.is_finite()),
                failure: e.failure.clone(),
            })
            .collect(),
    };
    write_json(&diagnostics, &args.diagnostics)?;
    Ok(diagnostics)
}

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage(format!("--{flag} must list at least one value")));
    }
    items
        .into_iter()
        .map(|s| s.parse::<T>().map_err(|e| CliError::Usage(format!("--{flag}: {s:?}: {e}"))))
        .collect()
}

pub fn grid_spec(args: &GridArgs) -> Result<GridSpec, CliError> {
    let mut spec = match args.preset {
        Preset::Reduced => GridSpec::reduced(),
        Preset::Full => GridSpec::full(),
    };
    if let Some(raw) = &args.kinds {
        spec.kinds = parse_list("kinds", raw)?;
    }
    if let Some(raw) = &args.similarities {
        spec.similarities = parse_list("similarities", raw)?;
    }
    if let Some(raw) = &args.external_counts {
        spec.external_counts = parse_list("external-counts", raw)?;
    }
    if let Some(raw) = &args.external_sizes {
        spec.external_sizes = parse_list("external-sizes", raw)?;
    }
    if let Some(raw) = &args.target_sizes {
        spec.target_sizes = parse_list("target-sizes", raw)?;
    }
    spec.replicates = args.replicates.unwrap_or(spec.replicates);
    spec.n_test = args.n_test.unwrap_or(spec.n_test);
    spec.k = args.k.unwrap_or(spec.k);
    spec.c = args.c.unwrap_or(spec.c);
    spec.master_seed = args.seed;
    spec.truncation_percentile = weighting(args.truncate_pct, WeightScheme::Adjusted, None)?.truncation_percentile;
    spec.validate().map_err(|e| CliError::core("grid", e))?;
    Ok(spec)
}

pub fn cmd_grid(args: &GridArgs) -> Result<simweight::harness::GridOutput, CliError> {
    let spec = grid_spec(args)?;
    let output = run_grid(&spec, args.jobs).map_err(|e| CliError::core("grid", e))?;
    let mut out = create(&args.out)?;
    write_results_csv(&output.results, &mut out).map_err(|e| CliError::core("writing grid results", e))?;
    out.flush()?;
    write_json(&output.summary, &args.summary)?;
    Ok(output)
}

fn write_bootstrap_tables(reports: &[BootstrapReport], prefix: &str) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());

    let mut obs = csv::Writer::from_writer(create(Path::new(&format!("{prefix}_observations.csv")))?);
    obs.write_record(["target", "method", "row", "y", "n_oob", "mean_abs_error", "p05", "p95"]).map_err(csv_err)?;
    for report in reports {
        for m in &report.methods {
            for o in &m.observations {
                obs.write_record([
                    report.target_label.clone(),
                    m.method.to_string(),
                    o.row.to_string(),
                    o.y.to_string(),
                    o.n_oob.to_string(),
                    o.mean_abs_error.to_string(),
                    o.p05.to_string(),
                    o.p95.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    obs.flush()?;

    let mut cdf = csv::Writer::from_writer(create(Path::new(&format!("{prefix}_cdf.csv")))?);
    cdf.write_record(["target", "method", "value", "cumulative"]).map_err(csv_err)?;
    for report in reports {
        for m in &report.methods {
            for (v, c) in m.cdf.support.iter().zip(&m.cdf.cumulative) {
                cdf.write_record([report.target_label.clone(), m.method.to_string(), v.to_string(), c.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    cdf.flush()?;
    Ok(())
}

pub fn cmd_bootstrap(args: &BootstrapArgs) -> Result<Vec<BootstrapReport>, CliError> {
    let weighting = weighting(args.truncate_pct, WeightScheme::Adjusted, None)?;
    if let Some(l) = args.boxcox_lambda {
        if !l.is_finite() {
            return Err(CliError::Usage(format!("--boxcox-lambda must be finite, got {l}")));
        }
    }
    let data = load(&args.input)?;
    let labels = data.subgroup_labels();
    let targets = if args.target == "all" { labels } else { vec![args.target.clone()] };
    let options = BootstrapOptions {
        replicates: args.replicates as usize,
        loss: args.loss,
        seed: args.seed,
        box_cox_lambda: args.boxcox_lambda,
        weighting,
    };
    let reports = targets
        .iter()
        .map(|t| evaluate_target(&data, t, &options).map_err(|e| CliError::core(format!("bootstrap, target {t:?}"), e)))
        .collect::<Result<Vec<_>, _>>()?;
    write_json(&reports, Path::new(&format!("{}_report.json", args.out_prefix)))?;
    write_bootstrap_tables(&reports, &args.out_prefix)?;
    Ok(reports)
}

/// Runs the command line and returns the process exit code.
pub fn run(args: Vec<OsString>, env_config: Option<OsString>) -> i32 {
    let cmd = Cli::command();
    let args = match expand_args(&cmd, args, env_config) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|shifts| {
            let line = format!("shift vector: {shifts:?}");
            if a.out.as_os_str() == "-" {
                eprintln!("{line}");
            } else {
                println!("{line}");
            }
        }),
        Command::Weigh(a) => cmd_weigh(a).map(|d| {
            if a.diagnostics.as_os_str() != "-" {
                println!("ess {:.3}, ess ratio {:.3}", d.ess, d.ess_ratio);
            }
        }),
        Command::Grid(a) => cmd_grid(a).map(|o| {
            eprintln!("{} cells, {} failed", o.summary.cells, o.summary.failed_cells);
        }),
        Command::Bootstrap(a) => cmd_bootstrap(a).map(|reports| {
            for r in &reports {
                for m in &r.methods {
                    println!(
                        "{}\t{}\t.632+ {:.4}\tapparent {:.4}\toob {:.4}\tess {:.2}",
                        r.target_label, m.method, m.estimate.estimate, m.estimate.apparent, m.estimate.oob, m.ess
                    );
                }
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
