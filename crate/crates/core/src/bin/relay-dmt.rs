use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relay_dmt::config::{parse_config_for, Mode, OutputFormat, RunConfig};
use relay_dmt::run::{execute, now_unix, render};

/// DMT curves and outage simulation for MIMO relay channels.
#[derive(Parser)]
#[command(name = "relay-dmt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CF, outer-bound and DF curves plus the DF threshold.
    Analytic(Common),
    /// Monte Carlo outage sweep and slope fit.
    Simulate(Common),
    /// Numerically optimized DCF tradeoff curve.
    Optimize(Common),
    /// DF multiplexing-gain region at a given diversity.
    Region(Common),
}

#[derive(Args)]
struct Common {
    /// TOML job file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when neither this nor `output.path` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Overrides `plan.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

fn load(mode: Mode, args: &Common) -> Result<RunConfig, String> {
    let text = fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let mut config = parse_config_for(&text, mode).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if let Some(out) = &args.out {
        config.output_path = Some(out.clone());
    }
    if let Some(format) = args.format {
        config.output_format = format;
    }
    if let Some(seed) = args.seed {
        match config.plan.as_mut() {
            Some(plan) => plan.seed = seed,
            None => log::warn!("--seed has no effect in {mode} mode"),
        }
    }
    Ok(config)
}

fn run(mode: Mode, args: &Common) -> Result<(), String> {
    let config = load(mode, args)?;
    let report = execute(&config).map_err(|e| e.to_string())?;
    let stamp = (!args.no_timestamp).then(now_unix);
    let text = render(&report, &config, config.output_format, stamp);
    match &config.output_path {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Analytic(a) => (Mode::Analytic, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Optimize(a) => (Mode::Optimize, a),
        Command::Region(a) => (Mode::Region, a),
    };
    match run(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relay-dmt: {e}");
            ExitCode::FAILURE
        }
    }
}
