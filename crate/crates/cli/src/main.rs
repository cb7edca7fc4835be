//! `octx` command-line entry point.
//!
//! Exit status: 0 success, 2 usage, 3 missing input, 4 malformed input,
//! 5 invalid parameter, 6 invariant violation, 7 other I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use octx::Error;

mod commands;
mod config;
mod plot;

use commands::{Common, PlotKind, SearchFlags};

#[derive(Parser)]
#[command(name = "octx", version, about = "Twin-patch lesion screening pipeline and link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON parameter file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run directory for all outputs.
    #[arg(long)]
    out: PathBuf,
}

impl From<CommonArgs> for Common {
    fn from(a: CommonArgs) -> Self {
        Common {
            config: a.config,
            seed: a.seed,
            out: a.out,
        }
    }
}

#[derive(Args, Clone, Default)]
struct SearchArgs {
    #[arg(long)]
    max_iter: Option<usize>,
    /// Lattice points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Bracket shrink factor per iteration.
    #[arg(long)]
    shrink: Option<f64>,
    /// Stop once both brackets are narrower than this.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset (PGM frames plus manifest).
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Cut frames into patches, compute twin GLCM features, split by frame.
    Extract {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory written by `generate`.
        #[arg(long)]
        data: PathBuf,
    },
    /// FDT-GS threshold search on the training patches.
    Search {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory written by `extract`.
        #[arg(long)]
        patches: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Fit the twin classifier on the reliable sets.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        patches: PathBuf,
        /// `search.json` written by `search`.
        #[arg(long)]
        search: PathBuf,
    },
    /// Clean the training labels with the two-stream agent.
    Agent {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        patches: PathBuf,
        #[arg(long)]
        search: Option<PathBuf>,
        /// Run the planted-noise benchmark at this rate instead.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict the test patches with a saved model.
    Infer {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        patches: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Metrics report and ROC from a predictions file.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Simulate the adaptive link over one SNR trace.
    Simlink {
        #[command(flatten)]
        common: CommonArgs,
        /// `t,snr_db` CSV; defaults to a shipped fixture.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, conflicts_with = "trace")]
        fixture: Option<String>,
        /// Scheme table JSON; defaults to the built-in table.
        #[arg(long)]
        schemes: Option<PathBuf>,
    },
    /// Speed/accuracy sweep of adaptive and fixed links over the trace suite.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        schemes: Option<PathBuf>,
    },
    /// Render a CSV output as SVG.
    Plot {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        input: PathBuf,
        /// Inferred from the CSV header when omitted.
        #[arg(long, value_enum)]
        kind: Option<PlotKind>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
        Error::Io { .. } => 7,
        Error::Malformed { .. } | Error::Csv(_) | Error::Json(_) => 4,
        Error::Parameter(_) => 5,
        _ => 6,
    }
}

fn run(cli: Cli) -> octx::Result<()> {
    match cli.command {
        Command::Generate { common, frames } => commands::generate(&common.into(), frames),
        Command::Extract { common, data } => commands::extract(&common.into(), &data),
        Command::Search { common, patches, search } => {
            let flags = SearchFlags {
                max_iter: search.max_iter,
                grid: search.grid,
                shrink: search.shrink,
                tol: search.tol,
            };
            commands::search(&common.into(), &patches, &flags)
        }
        Command::Train { common, patches, search } => commands::train(&common.into(), &patches, &search),
        Command::Agent {
            common,
            patches,
            search,
            noise,
            epochs,
        } => commands::agent(&common.into(), &patches, search.as_deref(), noise, epochs),
        Command::Infer { common, patches, model } => commands::infer(&common.into(), &patches, &model),
        Command::Evaluate { common, predictions } => commands::evaluate(&common.into(), &predictions),
        Command::Simlink {
            common,
            trace,
            fixture,
            schemes,
        } => commands::simlink(&common.into(), trace.as_deref(), fixture.as_deref(), schemes.as_deref()),
        Command::Sweep {
            common,
            predictions,
            schemes,
        } => commands::sweep(&common.into(), &predictions, schemes.as_deref()),
        Command::Plot { common, input, kind } => commands::plot(&common.into(), &input, kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
