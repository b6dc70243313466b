use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modescout_cli::{cmd_report, cmd_run, Overrides};

/// Discover distinct mode sequences of black-box simulators.
///
/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#[derive(Parser)]
#[command(name = "modescout", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every selector and trial of a campaign config.
    Run {
        config: PathBuf,
        /// Seed base (trial i uses seed + i).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute curves and the summary table from stored records.
    Report {
        dir: PathBuf,
        /// Also write curves/ and summary.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Cmd::Run {
            config,
            seed,
            trials,
            out,
        } => cmd_run(&config, &Overrides { seed, trials, out }).map(|o| {
            print!("{}", o.summary_csv);
            for f in &o.failures {
                eprintln!("trial failed: {f}");
            }
            o.failures.is_empty()
        }),
        Cmd::Report { dir, out } => cmd_report(&dir, out.as_deref()).map(|csv| {
            print!("{csv}");
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
