use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paractive::cli::{cmd_run, cmd_sweep, RunConfig};
use paractive::error::Error;
use paractive::verify;

#[derive(Parser)]
#[command(name = "paractive", about = "Para-active learning simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one engine run from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the run record (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Node-count override.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Synchronous sweep over several node counts; writes summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated node counts, e.g. --k 1,2,4,8.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
    },
    /// Run the full release-gate check suite.
    Verify,
}

fn load(config: &Path, seed: Option<u64>, k: Option<usize>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(k) = k {
        cfg.cluster.k = k;
    }
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Argument(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, k } => {
            let cfg = match load(&config, seed, k) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = cmd_run(&cfg, out.as_deref()) {
                eprintln!("error: {e}");
                return exit_code_for(&e);
            }
            ExitCode::SUCCESS
        }
        Command::Sweep { config, out, seed, k } => {
            let cfg = match load(&config, seed, None) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = cmd_sweep(&cfg, &k, out.as_deref()) {
                eprintln!("error: {e}");
                return exit_code_for(&e);
            }
            ExitCode::SUCCESS
        }
        Command::Verify => match verify::run_all() {
            Ok(results) => {
                let mut failed = false;
                for r in &results {
                    println!("{}", r.line());
                    failed |= !r.passed && !r.skipped;
                }
                if failed {
                    ExitCode::from(1)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
