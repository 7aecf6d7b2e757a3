use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavepacket::bands_dump::dump_bands;
use wavepacket::config::parse_epsilon_list;
use wavepacket::geometry::{geometry_checks, run_geometry_suite};
use wavepacket::output::{emit_outputs, emit_report, OutputDir};
use wavepacket::validation::{run_validation, CheckOutcome};
use wavepacket::{scenario, ExperimentConfig, Overrides, Result};

/// Semiclassical Bloch-wavepacket experiments.
#[derive(Parser)]
#[command(name = "wavepacket", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the ε sweep.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Step of the particle–field and envelope integrators.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Comma-separated ε values, e.g. `1/16,1/32`.
    #[arg(long, global = true)]
    eps: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write trajectories, fields and plots.
    Simulate { config: String },
    /// Run an ε sweep for a built-in scenario or a configuration and apply its checks.
    Validate { scenario: String },
    /// Curvature, Hellmann–Feynman, gauge and anomalous-drift checks.
    Geometry { config: String },
    /// Band-structure table over the Brillouin zone.
    Bands { config: String },
}

fn load(spec: &str, flags: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = scenario::resolve(spec)?;
    let epsilons = flags.eps.as_deref().map(parse_epsilon_list).transpose()?;
    cfg.apply(&Overrides { output: flags.out.clone(), workers: flags.workers, dt: flags.dt, epsilons })?;
    Ok(cfg)
}

fn print_checks(checks: &[CheckOutcome]) {
    for c in checks {
        let value = c.value.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        println!("{} {}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, value, c.requirement);
    }
}

fn run(cli: Cli) -> Result<bool> {
    let line = std::env::args().collect::<Vec<_>>().join(" ");
    match &cli.command {
        Command::Simulate { config } | Command::Validate { scenario: config } => {
            let mut cfg = load(config, &cli.flags)?;
            if matches!(cli.command, Command::Simulate { .. }) {
                cfg.direct.dump_fields = true;
            }
            let result = run_validation(&cfg)?;
            let manifest = emit_outputs(&result, &cfg.output, &line)?;
            print_checks(&manifest.checks);
            println!("wrote {} files to {}", manifest.files.len(), cfg.output.display());
            Ok(manifest.passed)
        }
        Command::Geometry { config } => {
            let cfg = load(config, &cli.flags)?;
            let report = run_geometry_suite(&cfg)?;
            let checks = geometry_checks(&report);
            print_checks(&checks);
            let json = serde_json::to_value(&report).expect("report serializes");
            let manifest = emit_report(OutputDir::create(&cfg.output)?, &cfg, &line, json, checks)?;
            Ok(manifest.passed)
        }
        Command::Bands { config } => {
            let cfg = load(config, &cli.flags)?;
            dump_bands(&cfg, &cfg.output, &line)?;
            println!("wrote band table to {}", cfg.output.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
