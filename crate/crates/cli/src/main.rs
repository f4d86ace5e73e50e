use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cpmiss_core::harness::{
    classify_mechanism, enumerate_grid, parse_row_filter, read_rows_from_path, run_experiment, summarize,
    ConfigFilter, ExperimentOptions, GroupKey, InterceptScope, Statistic,
};
use cpmiss_core::{build_deployment_model, predict_single, CpmVariant, ModelArtifact, PartialRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Simulation of missing-data handling for logistic clinical prediction models.
#[derive(Parser)]
#[command(name = "cpmiss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run iterations over grid configurations and write one CSV row per
    /// (config, iteration, method, strategy, variant).
    Simulate(SimulateArgs),
    /// Reduce a results CSV to grouped medians or means.
    Summarize(SummarizeArgs),
    /// Develop one model (regression imputation without the outcome) and
    /// write it as a model file for `predict`.
    ExportModel(ExportArgs),
    /// Risk for a single record from a model file.
    Predict(PredictArgs),
    /// List grid configurations.
    Grid {
        /// Same syntax as `simulate --configs`.
        #[arg(long, default_value = "all")]
        configs: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Intercepts {
    /// Calibrate the intercepts on every generated dataset.
    PerDataset,
    /// Calibrate once per configuration on a large reference sample.
    PerConfig,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// `all`, ids and ranges (`0,5,10-12`) or predicates (`mechanism=MAR,pi_r1=0.5`).
    #[arg(long, default_value = "all")]
    configs: String,
    /// Records per generated cohort.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Number of multiple imputations.
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "per-dataset")]
    intercepts: Intercepts,
    /// Reference sample size for `--intercepts per-config`.
    #[arg(long, default_value_t = 1_000_000)]
    reference_n: usize,
}

#[derive(clap::Args)]
struct SummarizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "strategy,method,variant")]
    group_by: String,
    #[arg(long, default_value = "median")]
    stat: String,
    /// `key=value` conditions on the grouping columns, e.g. `mechanism=MAR,method=MI`.
    #[arg(long)]
    filter: Option<String>,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExportArgs {
    /// Grid configuration id.
    #[arg(long)]
    config: usize,
    #[arg(long, default_value = "base")]
    variant: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x2: f64,
    /// Omit when the value is missing.
    #[arg(long, allow_hyphen_values = true)]
    x1: Option<f64>,
    /// Accept a missing `x1` and fill it in with the model's imputation model.
    #[arg(long)]
    allow_missing: bool,
}

fn main() -> Result<()> {
    let outcome = match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Summarize(args) => summarize_cmd(args),
        Command::ExportModel(args) => export_model(args),
        Command::Predict(args) => predict(args),
        Command::Grid { configs } => grid(&configs),
    };
    match outcome {
        // output piped into `head` and friends
        Err(e) if e.downcast_ref::<io::Error>().map(io::Error::kind) == Some(io::ErrorKind::BrokenPipe) => {
            Ok(())
        }
        other => other,
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let options = ExperimentOptions {
        master_seed: args.seed,
        iterations: args.iterations,
        configs: args.configs.parse::<ConfigFilter>()?,
        n_total: Some(args.n),
        m: args.m,
        workers,
        output: args.out,
        intercepts: match args.intercepts {
            Intercepts::PerDataset => InterceptScope::PerDataset,
            Intercepts::PerConfig => InterceptScope::PerConfig {
                reference_n: args.reference_n,
            },
        },
    };
    let start = Instant::now();
    let summary = run_experiment(&options, |p| {
        eprint!(
            "\r{}/{} iterations ({:.0?})",
            p.tasks_done,
            p.tasks_total,
            start.elapsed()
        );
    })?;
    eprintln!();
    eprintln!(
        "{} configs, {} rows ({} with errors) written to {}",
        summary.configs,
        summary.rows,
        summary.error_rows,
        summary.output.display()
    );
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> Result<()> {
    let rows = read_rows_from_path(&args.input)?;
    let group_by = GroupKey::parse_list(&args.group_by)?;
    let statistic: Statistic = args.stat.parse()?;
    let filter = match &args.filter {
        Some(f) => parse_row_filter(f)?,
        None => Vec::new(),
    };
    let table = summarize(&rows, &group_by, statistic, &filter)?;
    match args.out {
        Some(path) => {
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            table.write_csv(BufWriter::new(file))?;
        }
        None => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            io::stdout().lock().write_all(&buf)?;
        }
    }
    Ok(())
}

fn export_model(args: ExportArgs) -> Result<()> {
    let grid = enumerate_grid();
    let Some(config) = grid.get(args.config) else {
        bail!("config id {} out of range (grid has {})", args.config, grid.len());
    };
    let config = cpmiss_core::ParameterConfig {
        n_total: args.n,
        ..*config
    };
    let variant: CpmVariant = args.variant.parse()?;
    let artifact = build_deployment_model(&config, variant, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
    artifact.write(&args.out)?;
    eprintln!(
        "{} model for config {} written to {}",
        variant,
        args.config,
        args.out.display()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let artifact = ModelArtifact::read(&args.model)?;
    let record = PartialRecord {
        x2: args.x2,
        x1: args.x1,
    };
    let p = predict_single(&artifact.cpm, &artifact.imputation, record, args.allow_missing)?;
    println!("{p}");
    Ok(())
}

fn grid(filter: &str) -> Result<()> {
    let grid = enumerate_grid();
    let ids = filter.parse::<ConfigFilter>()?.select(&grid)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "config_id,mechanism,beta_x1,beta_x2,beta_y,gamma_x1,gamma_x2,gamma_x1x2,pi_r1"
    )?;
    for id in ids {
        let c = &grid[id];
        writeln!(
            out,
            "{id},{},{},{},{},{},{},{},{}",
            classify_mechanism(c),
            c.beta_x1,
            c.beta_x2,
            c.beta_y,
            c.gamma_x1,
            c.gamma_x2,
            c.gamma_x1x2,
            c.pi_r1
        )?;
    }
    Ok(())
}
