use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use borinot_core::harness::{self, ScenarioConfig, ScenarioKind};
use clap::{Parser, Subcommand};

/// Simulate the hexarotor-with-arm scenarios and score the runs.
#[derive(Parser)]
#[command(name = "borinot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write run.csv and summary. A bundled config can be
    /// named instead of a path (see list-scenarios).
    Run {
        config: String,
        /// Output directory; overrides BORINOT_OUT_DIR and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the metrics of a saved run.
    Metrics { csv: PathBuf, config: String },
    /// List scenario kinds and bundled configs.
    ListScenarios,
    /// Print the full default config of a scenario kind.
    PrintDefaultConfig { kind: String },
}

fn load(config: &str) -> Result<ScenarioConfig> {
    let path = PathBuf::from(config);
    if !path.is_file() {
        if let Some(c) = harness::bundled(config) {
            return Ok(c);
        }
    }
    harness::load_config(&path).with_context(|| format!("loading {config}"))
}

fn print_report(report: &harness::MetricsReport) {
    print!("{}", report.summary());
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let passed = match cli.command {
        Command::Run { config, out } => {
            let config = load(&config)?;
            let outcome = harness::run(&config)?;
            let dir = harness::output_dir(&config, out.as_deref());
            let artifacts = harness::write_outputs(&outcome.log.rows, &outcome.report, &config, &dir)?;
            print_report(&outcome.report);
            if !outcome.log.completed() {
                eprintln!("run stopped early: {:?}", outcome.log.status);
            }
            eprintln!("wrote {} and {}", artifacts.csv.display(), artifacts.summary.display());
            outcome.report.passed()
        }
        Command::Metrics { csv, config } => {
            let config = load(&config)?;
            let rows = harness::read_csv(&csv)?;
            let report = harness::extract_metrics(&rows, &config);
            print_report(&report);
            report.passed()
        }
        Command::ListScenarios => {
            println!("kinds:");
            for kind in ScenarioKind::ALL {
                println!("  {kind}");
            }
            println!("bundled configs:");
            for (name, _) in harness::BUNDLED {
                println!("  {name}");
            }
            true
        }
        Command::PrintDefaultConfig { kind } => {
            let Some(kind) = ScenarioKind::parse(&kind) else {
                bail!("unknown scenario kind `{kind}`; see list-scenarios");
            };
            print!("{}", ScenarioConfig::default_for(kind).to_toml());
            true
        }
    };
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
