use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use echospot_cli::config::{Overrides, ScenarioConfig};
use echospot_cli::{pipeline, report, run_all, CliError, Layout};
use echospot_core::DesignKind;

#[derive(Parser)]
#[command(
    name = "echospot",
    version,
    about = "Spot-forming filter design through room echoes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file; the built-in default scenario is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    output: PathBuf,
    /// Overrides every seed in the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["speech", "noise"])]
    design_signal: Option<String>,
    /// Receiver jitter in metres for the evaluation RIRs.
    #[arg(long, global = true)]
    mismatch_sigma: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate design and evaluation RIRs.
    SimulateRirs,
    /// Design filters from messages and design RIRs.
    Design,
    /// Render, score and write metric files.
    Evaluate,
    /// Bundle metric files with a run manifest.
    Report,
    /// All stages in order.
    RunAll,
}

fn load(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    let design_signal = common
        .design_signal
        .as_deref()
        .map(|s| s.parse::<DesignKind>())
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.apply(&Overrides {
        seed: common.seed,
        design_signal,
        mismatch_sigma: common.mismatch_sigma,
        max_iters: common.max_iters,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(&cli.common)?;
    let out = &cli.common.output;
    let layout = Layout::new(out);
    match cli.command {
        Command::SimulateRirs => pipeline::simulate_rirs(&cfg, &layout).map(drop),
        Command::Design => pipeline::design(&cfg, &layout).map(drop),
        Command::Evaluate => pipeline::evaluate(&cfg, &layout).map(drop),
        Command::Report => report::report(&cfg, &layout).map(drop),
        Command::RunAll => run_all(&cfg, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
