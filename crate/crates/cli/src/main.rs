use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;
use vqmargin_cli::config::{Command, ExperimentConfig};
use vqmargin_core::geometry::fault::{self, Fault};

#[derive(Parser)]
#[command(name = "vqmargin", version, about = "Vector quantization margin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Excess risk of ERM against sample size, with a log-log slope fit.
    Convergence(RunArgs),
    /// Optimal codebooks, margin condition verdict, separation and kappa0.
    MarginReport(RunArgs),
    /// Supremum excess risk over the adversarial family against sample size.
    MinimaxDemo(RunArgs),
    /// A single ERM run with its true and excess risk.
    Erm(RunArgs),
    /// Property-verification suites.
    Verify(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    LargestIndexTieBreak,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restricts `verify` to the named suites; repeatable.
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<FaultArg>,
}

impl Cmd {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Self::Convergence(a) => (Command::Convergence, a),
            Self::MarginReport(a) => (Command::MarginReport, a),
            Self::MinimaxDemo(a) => (Command::MinimaxDemo, a),
            Self::Erm(a) => (Command::Erm, a),
            Self::Verify(a) => (Command::Verify, a),
        }
    }
}

fn load(command: Command, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if command == Command::Verify => ExperimentConfig::new(command),
        None => bail!("`{}` needs --config", command.as_str()),
    };
    if cfg.command != command {
        bail!("the configuration is for `{}`, not `{}`", cfg.command.as_str(), command.as_str());
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if !args.suites.is_empty() {
        cfg.suites = args.suites.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let (command, args) = Cli::parse().command.split();
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let fault_name = args.inject_fault.map(|f| match f {
        FaultArg::LargestIndexTieBreak => {
            fault::inject(Fault::LargestIndexTieBreak);
            "largest-index-tie-break".to_owned()
        }
    });
    let cfg = load(command, &args)?;
    vqmargin_cli::run(&cfg, fault_name)
}
