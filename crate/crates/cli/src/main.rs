//! `rif`: label, train, evaluate and diagnose intraday trading agents.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rif_core::pipeline::{
    evaluate_workflow, label_workflow, report_workflow, scatter_workflow, train_workflow, write_outputs, Overrides,
    RunConfig,
};
use rif_core::ppo::Checkpoint;
use rif_core::ErrorKind;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "rif", version, about = "Intraday RL trading with imitation-augmented rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Expert commission ϑ in bps; pins the grid to this value.
    #[arg(long)]
    theta_bps: Option<f64>,
    /// Trading commission φ in bps; pins the grid to this value.
    #[arg(long)]
    phi_bps: Option<f64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Oracle labels for every day of the input.
    Label(Common),
    /// Train an agent on the configured window (grid search included).
    Train(Common),
    /// Backtest a checkpoint on the test range of the configured window.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint JSON written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// RF versus RIF rewards under a random policy.
    Scatter(Common),
    /// Walk-forward study with RIF, RF and buy-and-hold rows.
    Report(Common),
}

enum Failure {
    Core(rif_core::Error),
    Other(anyhow::Error),
}

impl From<rif_core::Error> for Failure {
    fn from(e: rif_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&c.config)?;
    cfg.apply(&Overrides {
        seed: c.seed,
        theta_bps: c.theta_bps,
        phi_bps: c.phi_bps,
        output_dir: c.out.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Label(c) | Command::Train(c) | Command::Scatter(c) | Command::Report(c) => c,
        Command::Evaluate { common, .. } => common,
    };
    let cfg = load_config(common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(rif_core::Error::Config("--jobs must be at least 1".into()).into());
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("building the worker pool")?;

    let files = pool.install(|| -> Result<_, Failure> {
        Ok(match &cli.command {
            Command::Label(_) => label_workflow(&cfg)?,
            Command::Train(_) => train_workflow(&cfg)?.1,
            Command::Evaluate { checkpoint, .. } => {
                let ck = Checkpoint::load(checkpoint)
                    .map_err(|e| rif_core::Error::Config(format!("checkpoint {}: {e}", checkpoint.display())))?;
                evaluate_workflow(&cfg, &ck)?
            }
            Command::Scatter(_) => scatter_workflow(&cfg)?,
            Command::Report(_) => report_workflow(&cfg)?,
        })
    })?;
    write_outputs(&cfg.output_dir, &files)
        .with_context(|| format!("writing outputs to {}", cfg.output_dir.display()))?;
    for f in &files {
        println!("{}", cfg.output_dir.join(&f.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Runtime => EXIT_RUNTIME,
            })
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
