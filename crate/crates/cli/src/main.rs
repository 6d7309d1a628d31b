//! `hurst`: coefficients, simulation, estimation, expansion tables and Monte
//! Carlo reports from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hurst_core::HurstError;

use config::{Format, Settings};

#[derive(Debug, Parser)]
#[command(name = "hurst", version, about = "Hurst index estimation from second-order differences of fBm")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Hurst coefficient in (0, 1).
    #[arg(long = "H", global = true, value_name = "H")]
    h: Option<f64>,
    /// Horizon (default 1).
    #[arg(long = "T", global = true, value_name = "T")]
    t: Option<f64>,
    /// Coarse grid count; paths have 2n+1 points.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative truncation tolerance for the series constants.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Largest truncation radius tried before giving up.
    #[arg(long, global = true)]
    max_radius: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON file of settings; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// fBm generator: circulant, cholesky or auto.
    #[arg(long, global = true)]
    method: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Limit constants and expansion coefficients at one H.
    Coeffs,
    /// One fBm path on the fine grid as `t,B` CSV.
    Simulate,
    /// Estimate H from an observed series.
    Estimate(EstimateArgs),
    /// Tabulate the normal and expansion densities of √n(Ĥ − H).
    Expand(ExpandArgs),
    /// Monte Carlo comparison of histogram, normal and expansion.
    Mc(McArgs),
    /// Developer checks: lattice-sum convergence and kernel decay.
    Diag,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// CSV file with the series in its last column.
    #[arg(long, conflicts_with = "stdin")]
    input: Option<PathBuf>,
    /// Read the series from standard input.
    #[arg(long)]
    stdin: bool,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    /// Half-width of the z grid (default 6√v).
    #[arg(long)]
    range: Option<f64>,
    /// Number of grid points, at least 3.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    reps: Option<usize>,
    /// Histogram bins (odd).
    #[arg(long)]
    bins: Option<usize>,
    /// Half-width of the binned z range (default 5√v).
    #[arg(long)]
    z_range: Option<f64>,
    /// Estimators to evaluate: plain, b_star, b_star_star.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Also write the histogram figure here.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Also write the density table here.
    #[arg(long)]
    density_csv: Option<PathBuf>,
}

fn flag_settings(cli: &Cli) -> Settings {
    let c = &cli.common;
    let mut s = Settings {
        h: c.h,
        t: c.t,
        n: c.n,
        seed: c.seed,
        tol: c.tol,
        max_radius: c.max_radius,
        out: c.out.clone(),
        format: c.format,
        method: c.method.clone(),
        ..Settings::default()
    };
    match &cli.command {
        Command::Estimate(a) => s.input = a.input.clone(),
        Command::Expand(a) => {
            s.range = a.range;
            s.steps = a.steps;
        }
        Command::Mc(a) => {
            s.reps = a.reps;
            s.bins = a.bins;
            s.z_range = a.z_range;
            s.variants = a.variants.clone();
            s.svg = a.svg.clone();
            s.density_csv = a.density_csv.clone();
        }
        Command::Coeffs | Command::Simulate | Command::Diag => {}
    }
    s
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let mut settings = flag_settings(&cli).over(file);
    if let Command::Estimate(a) = &cli.command {
        if a.stdin {
            settings.input = None;
        }
    }
    let out = match &cli.command {
        Command::Coeffs => commands::coeffs(&settings)?,
        Command::Simulate => commands::simulate(&settings)?,
        Command::Estimate(a) => commands::estimate(&settings, a.stdin)?,
        Command::Expand(_) => commands::expand(&settings)?,
        Command::Mc(_) => commands::mc(&settings)?,
        Command::Diag => commands::diag(&settings)?,
    };
    out.write(settings.out.as_deref())
}

/// Exit status 2 for a truncation that did not reach its tolerance, 1 for
/// every other failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    let tolerance = err.chain().any(|cause| {
        let mut e = cause.downcast_ref::<HurstError>();
        while let Some(inner) = e {
            match inner {
                HurstError::ToleranceNotAchieved { .. } => return true,
                HurstError::Replication { source, .. } => e = Some(source),
                _ => e = None,
            }
        }
        false
    });
    if tolerance {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
