use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mrwlab::cli::{configure_workers, execute, Command, Status};

/// Ladder epochs, Wiener-Hopf factorization and simulation for Markov
/// random walks with a finite driving chain.
#[derive(Parser, Debug)]
#[command(name = "mrwlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, CSV tables and summary.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                Status::ConfigError.exit_code()
            } else {
                0
            };
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(Status::ConfigError.exit_code() as u8);
    }
    let (bundle, out) = execute(args.command, &args.config, args.seed, args.out);
    print!("{}", bundle.summary);
    if let Some(dir) = out {
        if let Err(e) = bundle.write(&dir) {
            eprintln!("error: writing {}: {e}", dir.display());
            return ExitCode::from(Status::ConfigError.exit_code() as u8);
        }
    }
    ExitCode::from(bundle.exit_code() as u8)
}
