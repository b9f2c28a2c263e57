//! Command-line front end: each subcommand runs one audit (or the path
//! simulator) from a TOML config plus flag overrides, writes CSV or JSON
//! into the output directory, and encodes the verdict in the exit status
//! (0 all-pass, 2 audit failure, 1 usage or runtime error).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hermvar::experiments::{
    run_assumption_audit, run_comparison_check, run_cross_covariance_audit, run_distance_decay,
    run_lil_trajectory, run_simulate, run_variance_table, AuditReport, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "hermvar",
    about = "Decay audits and exact simulation for Hermite variations of long-memory Gaussian sequences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration; defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Exact variance-law audit across scales.
    VarianceTable,
    /// Exact normalized cross-covariances over blocking subsequences.
    CrossCov,
    /// Monte-Carlo Kolmogorov decay against the Stein estimate.
    DistanceDecay,
    /// Multi-dimensional comparison-inequality check.
    Comparison,
    /// Running-record trajectory (non-assertive).
    LilTrajectory,
    /// Consolidated assumption audit (A1-A4).
    Audit,
    /// Dump a seeded path ensemble as CSV.
    Simulate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VarianceTable => "variance-table",
            Command::CrossCov => "cross-cov",
            Command::DistanceDecay => "distance-decay",
            Command::Comparison => "comparison",
            Command::LilTrajectory => "lil-trajectory",
            Command::Audit => "audit",
            Command::Simulate => "simulate",
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg: ExperimentConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_report(report: &AuditReport, out_dir: &Path, name: &str, format: Format) -> Result<PathBuf, String> {
    fs::create_dir_all(out_dir).map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let (path, payload) = match format {
        Format::Csv => (out_dir.join(format!("{name}.csv")), report.to_csv()),
        Format::Json => (out_dir.join(format!("{name}.json")), report.to_json()),
    };
    fs::write(&path, payload).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    let cfg = load_config(&cli)?;
    let name = cli.command.name();

    if let Command::Simulate = cli.command {
        let ensemble = run_simulate(&cfg).map_err(|e| e.to_string())?;
        fs::create_dir_all(&cli.out).map_err(|e| format!("cannot create {}: {e}", cli.out.display()))?;
        let path = cli.out.join("paths.csv");
        let mut buf = Vec::new();
        hermvar::sampler::write_paths_csv(&mut buf, &ensemble.paths).map_err(|e| e.to_string())?;
        fs::write(&path, buf).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        println!("simulate: wrote {} paths to {}", ensemble.paths.len(), path.display());
        return Ok(true);
    }

    let report = match cli.command {
        Command::VarianceTable => run_variance_table(&cfg),
        Command::CrossCov => run_cross_covariance_audit(&cfg),
        Command::DistanceDecay => run_distance_decay(&cfg),
        Command::Comparison => run_comparison_check(&cfg),
        Command::LilTrajectory => run_lil_trajectory(&cfg),
        Command::Audit => run_assumption_audit(&cfg),
        Command::Simulate => unreachable!(),
    }
    .map_err(|e| e.to_string())?;

    let path = write_report(&report, &cli.out, name, cli.format)?;
    println!("{} -> {}", report.summary(), path.display());
    Ok(report.pass)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
