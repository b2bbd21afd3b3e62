//! `spectool`: specificity scores, tests, sensitivity analysis, causal-effect
//! estimation, simulation experiments, and summary-statistic analysis from
//! the command line.
//!
//! Exit codes: 0 on success, 2 on input/validation errors, 3 on numerical
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spc_core::Error;

mod run;

#[derive(Debug, Parser)]
#[command(name = "spectool", version, about = "Specificity-based confounding analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Svg,
}

#[derive(Debug, Args)]
struct ScoreFlags {
    /// Upper bound on the number of causes per outcome (defaults to the
    /// most conservative choice K-2)
    #[arg(long)]
    kstar: Option<usize>,
    /// Upper bound on the number of outcomes a treatment pair affects
    /// (defaults to P-2)
    #[arg(long)]
    pstar: Option<usize>,
    /// CSV with per-pair bounds: treatment,outcome,kstar,pstar (one-based indices)
    #[arg(long)]
    kp_table: Option<PathBuf>,
    /// Critical value override in [0,1); replaces the (K*,P*) formula
    #[arg(long)]
    tau: Option<f64>,
    /// Sensitivity parameter grid; repeat the flag for several values
    #[arg(long = "eta")]
    eta: Vec<f64>,
    /// Treat a gamma entry within this tolerance of zero as zero
    #[arg(long, default_value_t = 1e-8)]
    zero_tol: f64,
}

#[derive(Debug, Args)]
struct BootstrapFlags {
    /// Bootstrap replicate count; 0 disables resampling outputs
    #[arg(long = "bootstrap-b", default_value_t = 200)]
    bootstrap_b: usize,
    /// Reject when more than this fraction of replicate scores exceeds tau
    #[arg(long, default_value_t = 0.95)]
    reject_fraction: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score and test every treatment-outcome pair of a CSV dataset, and
    /// estimate the causal-effect matrix
    Analyze {
        /// Input CSV: header row with X:-prefixed treatment and Y:-prefixed
        /// outcome columns
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "spectool-out")]
        out: PathBuf,
        #[command(flatten)]
        score: ScoreFlags,
        #[command(flatten)]
        bootstrap: BootstrapFlags,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Analyze on the raw scale instead of standardizing columns first
        #[arg(long)]
        raw_scale: bool,
    },
    /// Run the benchmark generators and Monte Carlo power/bias experiments
    Simulate {
        /// Scenario name: I, II, or sensitivity
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "spectool-out")]
        out: PathBuf,
        #[command(flatten)]
        score: ScoreFlags,
        /// Magnitude of the planted small effects in the sensitivity scenario
        #[arg(long, default_value_t = 0.15)]
        perturb_magnitude: f64,
        /// Write one generated dataset to this CSV and skip the experiments
        /// unless experiment flags are also wanted
        #[arg(long)]
        dump_csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Reduce two-sample summary statistics and run the population-mode
    /// analysis pipeline on the result
    Mr {
        /// Two files: instrument-outcome associations, then
        /// instrument-exposure associations
        #[arg(long, num_args = 1, action = clap::ArgAction::Append)]
        input: Vec<PathBuf>,
        #[arg(long, default_value = "spectool-out")]
        out: PathBuf,
        #[command(flatten)]
        score: ScoreFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Re-render heatmaps from a reports.json produced by analyze or mr
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "spectool-out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Svg)]
        format: Format,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::SingularGram
        | Error::IllConditioned { .. }
        | Error::RankDeficient
        | Error::DegenerateDesign { .. }
        | Error::TooManyFailures { .. } => 3,
        _ => 2,
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("SPECTOOL_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            input,
            out,
            score,
            bootstrap,
            seed,
            format,
            raw_scale,
        } => run::analyze(&input, &out, &score, &bootstrap, seed, format, raw_scale),
        Command::Simulate {
            scenario,
            n,
            reps,
            seed,
            out,
            score,
            perturb_magnitude,
            dump_csv,
            format,
        } => run::simulate(
            &scenario,
            n,
            reps,
            seed,
            &out,
            &score,
            perturb_magnitude,
            dump_csv.as_deref(),
            format,
        ),
        Command::Mr {
            input,
            out,
            score,
            format,
        } => run::mr(&input, &out, &score, format),
        Command::Render { input, out, format } => run::render(&input, &out, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("spectool: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
