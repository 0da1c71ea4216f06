use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flsnn_cli::{plot, report, run, sweep};

#[derive(Parser)]
#[command(name = "flsnn", about = "Federated SNN training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment from a config file
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config `output`, then $FLSNN_OUT_ROOT)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the config once per value of one dotted config key
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key, e.g. compression.kappa or channel.sigma
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Parallel runs (default: one per core)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Bandwidth-for-accuracy table over finished run directories
    Report {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG line chart of one metrics column across run directories
    Plot {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Column of metrics.csv, e.g. test_acc
        #[arg(long, default_value = "test_acc")]
        field: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out, seed } => {
            run::cmd_train(&config, out.as_deref(), seed).map(|_| ())
        }
        Command::Sweep { config, axis, values, out, seed, jobs } => {
            sweep::cmd_sweep(&config, &axis, &values, out.as_deref(), seed, jobs).map(|_| ())
        }
        Command::Report { run_dirs, out } => report::cmd_report(&run_dirs, out.as_deref()).map(|_| ()),
        Command::Plot { run_dirs, field, out } => {
            plot::cmd_plot(&run_dirs, &field, out.as_deref()).map(|_| ())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
