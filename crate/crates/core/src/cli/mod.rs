//! Config-driven front end shared by the `mrwlab` binary and the tests.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

pub use commands::{run, Command};
pub use config::{CounterexampleConfig, CouplingConfig, ModelSource, RunConfig, SimulateConfig};
pub use report::{ReportBundle, Status, Table};

/// Environment variable capping the worker threads.
pub const WORKERS_ENV: &str = "MRWLAB_WORKERS";

/// Builds the global thread pool from `MRWLAB_WORKERS` if set. Results do
/// not depend on the thread count.
pub fn configure_workers() -> Result<(), String> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{WORKERS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Loads the config, applies command-line overrides, runs the command and
/// writes the bundle. Returns the bundle and the output directory used.
pub fn execute(
    command: Command,
    config: &std::path::Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> (ReportBundle, Option<PathBuf>) {
    let mut cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return (ReportBundle::from_error(command.name(), &e), out),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    let out = out.or_else(|| cfg.out.as_ref().map(|o| cfg.base_dir.join(o)));
    let bundle = run(command, &cfg);
    (bundle, out)
}
