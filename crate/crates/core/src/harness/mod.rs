//! Scenario configs, runs, metrics and the on-disk artifacts.

mod config;
mod io;
mod metrics;
mod scenario;

use std::path::PathBuf;

pub use config::{
    bundled, load_config, Axis, EeHold, HoverRegulation, JumpFly, OutputPaths, ScenarioConfig, ScenarioKind,
    TailDisplacement, Thresholds, Tracking, BUNDLED,
};
pub use io::{output_dir, read_csv, write_csv, write_outputs, write_summary, Artifacts, OUT_DIR_ENV, SCHEMA_LINE};
pub use metrics::{extract_metrics, Check, MetricsReport};
pub use scenario::{build_dynamics, run, run_setup, setup, tracking_costs, Outcome, Setup};

use crate::control::ControlError;
use crate::dynamics::ModelError;

fn at(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!(" at `{path}`")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config{}: {message}", at(.path))]
    Config { path: String, message: String },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed run log: {0}")]
    Log(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
