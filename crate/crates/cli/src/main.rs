//! `bipcover`: bipartition-cover bounds, sweeps, simulations and self-checks.

mod simulate;
mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use bipcover::bounds::{BoundReport, BoundSpec};
use bipcover::checks::{self, Suite};
use clap::{Parser, Subcommand};
use serde::Serialize;

use simulate::SimulateArgs;
use sweep::Grid;

#[derive(Parser)]
#[command(
    name = "bipcover",
    version,
    about = "Gene-count bounds for bipartition covers under the multispecies coalescent"
)]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "BIPCOVER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print all four bounds and the improvement ratios as JSON.
    Bounds {
        #[arg(short)]
        k: usize,
        /// Minimum internal branch length (coalescent units).
        #[arg(short = 't', long = "t-min")]
        t_min: f64,
        /// Target cover probability.
        #[arg(short)]
        q: f64,
    },
    /// Evaluate the bounds over a grid and write CSV.
    Sweep {
        /// Species counts: comma-separated values or inclusive ranges, e.g. `4..20,24`.
        #[arg(short, long, default_value = "4..20")]
        k: String,
        #[arg(short = 't', long = "t-min", default_value = "0.05,0.1,0.2,0.5,1,2")]
        t_min: String,
        #[arg(short, long, default_value = "0.5,0.9,0.99")]
        q: String,
        /// Output file (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate empirical cover quantiles and overestimation ratios and write CSV.
    Simulate(SimulateArgs),
    /// Run a self-check suite: oracles, dominance, asymptotics or all.
    Check { suite: String },
}

/// Domain and usage failures exit with 2, failed checks with 1.
enum Failure {
    Check,
    Usage(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

#[derive(Serialize)]
struct BoundsOutput {
    #[serde(flatten)]
    report: BoundReport,
    ratio_c: f64,
    ratio_s: f64,
    ratio_b: f64,
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(anyhow!("--threads must be positive").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Bounds { k, t_min, q } => {
            let report = BoundReport::compute(&BoundSpec::new(k, t_min, q)?)?;
            let [ratio_c, ratio_s, ratio_b] = report.improvement_ratios();
            let out = BoundsOutput { report, ratio_c, ratio_s, ratio_b };
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Sweep { k, t_min, q, output } => {
            let grid = Grid::parse(&k, &t_min, &q)?;
            let rows = grid.evaluate();
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed == rows.len() {
                let first = rows[0].error.as_deref().unwrap_or_default();
                return Err(anyhow!("all {failed} cells failed; first: {first}").into());
            }
            sweep::write_csv(&rows, open_output(output.as_ref())?)?;
            if failed > 0 {
                eprintln!("warning: {failed} of {} cells failed", rows.len());
            }
        }
        Command::Simulate(args) => {
            let rows = args.run()?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            simulate::write_csv(&rows, open_output(args.output.as_ref())?)?;
            if failed > 0 {
                eprintln!("warning: {failed} of {} rows failed", rows.len());
            }
        }
        Command::Check { suite } => {
            let suite: Suite = suite.parse()?;
            let report = checks::run(suite);
            println!("{report}");
            if !report.passed() {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
