//! Command-line front end: config loading, flag overrides, and dispatch to
//! the four commands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use viewplan::error::Result;

use config::{load_config, LoadedConfig, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "viewplan",
    version,
    about = "Viewpoint selection, control-proxy simulation, and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the selection sweep over policies and budgets.
    Select(CommonArgs),
    /// Run the kinematic control-proxy benchmark.
    Simulate(CommonArgs),
    /// Assemble diagnostic tables from run-record CSVs.
    Report(CommonArgs),
    /// Build a candidate pool, or summarize an existing pool file.
    Pool(PoolArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Config file (.toml or .json).
    #[arg(long)]
    pub config: PathBuf,
    /// Override run.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override run.budgets (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Override run.policies (repeat the flag or comma-separate).
    #[arg(long = "policy", value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override run.threads (0 sizes the pool automatically).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override selection.sigma.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Override selection.unique_cap.
    #[arg(long)]
    pub unique_cap: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            budgets: self.budgets.clone(),
            policies: self.policies.clone(),
            out: self.out.clone(),
            threads: self.threads,
            sigma: self.sigma,
            unique_cap: self.unique_cap,
        }
    }
}

#[derive(Args, Debug)]
pub struct PoolArgs {
    /// Config file (.toml or .json); required unless --inspect is given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Summarize an existing pool JSON instead of building one.
    #[arg(long)]
    pub inspect: Option<PathBuf>,
    /// Override run.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override run.threads (0 sizes the pool automatically).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Sizes the global worker pool; 0 keeps the default. A second call is a
/// no-op, which is fine: one process runs one command.
fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn load(path: &PathBuf, overrides: &Overrides) -> Result<LoadedConfig> {
    let mut lc = load_config(path)?;
    overrides.apply(&mut lc.config);
    init_threads(lc.config.run.threads);
    Ok(lc)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Select(args) => commands::cmd_select(&load(&args.config, &args.overrides())?),
        Command::Simulate(args) => commands::cmd_simulate(&load(&args.config, &args.overrides())?),
        Command::Report(args) => commands::cmd_report(&load(&args.config, &args.overrides())?),
        Command::Pool(args) => {
            let overrides = Overrides {
                seed: args.seed,
                out: args.out.clone(),
                threads: args.threads,
                ..Overrides::default()
            };
            let lc = match &args.config {
                Some(path) => Some(load(path, &overrides)?),
                None => None,
            };
            commands::cmd_pool(lc.as_ref(), args.inspect.as_deref())
        }
    }
}
