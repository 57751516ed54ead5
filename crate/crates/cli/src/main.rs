//! `obsint`: run the built-in observer scenarios from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use obsint_core::harness::{self, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "obsint",
    version,
    about = "Differentiation-integration observer toolkit",
    long_about = "Runs signal-integration, frequency-analysis and quadrotor closed-loop \
                  scenarios, writing CSV data, SVG plots and a metrics summary per run."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario
    Run {
        /// Scenario name (see `obsint list`)
        scenario: String,
        /// TOML file with flat dotted-key overrides
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: out/<scenario>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the random seed
        #[arg(long)]
        seed: Option<u64>,
        /// Run without writing any files
        #[arg(long)]
        no_files: bool,
    },
    /// List the built-in scenarios
    List,
    /// Frequency-response sweep for an observer preset
    Bode {
        /// Observer preset: diffint (n=3, p=2) or diffdouble (n=4, p=3)
        preset: String,
        /// Perturbation parameter values (repeatable)
        #[arg(long = "eps")]
        eps: Vec<f64>,
        /// Output directory (default: out/<scenario>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::List => {
            for (name, summary) in harness::SCENARIOS {
                println!("{name:<16} {summary}");
            }
            Ok(())
        }
        Command::Run {
            scenario,
            config,
            out,
            seed,
            no_files,
        } => {
            let mut cfg = ScenarioConfig::new(&scenario);
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                cfg = cfg.with_overrides_str(&text)?;
            }
            if let Some(seed) = seed {
                cfg = cfg.with_seed(seed);
            }
            if !no_files {
                cfg.out_dir = Some(out.unwrap_or_else(|| PathBuf::from("out").join(&scenario)));
            }
            execute(cfg)
        }
        Command::Bode { preset, eps, out } => {
            let scenario = match preset.as_str() {
                "diffint" => "bode-diffint",
                "diffdouble" => "bode-diffdouble",
                other => bail!(
                    "unknown preset {other:?}; expected \"diffint\" or \"diffdouble\""
                ),
            };
            let mut cfg = ScenarioConfig::new(scenario);
            if !eps.is_empty() {
                let list = eps
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(", ");
                cfg = cfg.with_overrides_str(&format!("bode.eps = [{list}]"))?;
            }
            cfg.out_dir = Some(out.unwrap_or_else(|| PathBuf::from("out").join(scenario)));
            execute(cfg)
        }
    }
}

fn execute(cfg: ScenarioConfig) -> anyhow::Result<()> {
    let name = cfg.scenario.clone();
    let outcome = harness::run_scenario(&cfg)
        .with_context(|| format!("running scenario {name}"))?;
    println!(
        "{name}: {} samples, config {}",
        outcome.record.len(),
        outcome.config.hash
    );
    for (k, v) in &outcome.metrics {
        println!("  {k} = {v}");
    }
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}
