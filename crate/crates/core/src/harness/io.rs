use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::ScenarioConfig;
use super::metrics::MetricsReport;
use super::HarnessError;
use crate::control::LogRow;

/// First line of every run log. Bump the number when the columns change.
pub const SCHEMA_LINE: &str = "# borinot run log schema 1";

/// Overrides the configured output directory; `--out` overrides both.
pub const OUT_DIR_ENV: &str = "BORINOT_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// `explicit`, else `$BORINOT_OUT_DIR`, else the config's directory.
pub fn output_dir(config: &ScenarioConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output.dir.clone(),
    }
}

/// Debug formatting is the shortest text that parses back to the same bits.
fn field(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv(path: &Path, rows: &[LogRow]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{SCHEMA_LINE}").map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| HarnessError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(LogRow::COLUMNS).map_err(fail)?;
    for r in rows {
        w.write_record(r.values().into_iter().map(field)).map_err(fail)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<LogRow>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    if first.trim_end() != SCHEMA_LINE {
        return Err(HarnessError::Log(format!(
            "expected `{SCHEMA_LINE}` on the first line, found `{}`",
            first.trim_end()
        )));
    }
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| HarnessError::Log(e.to_string()))?;
    if !header.iter().eq(LogRow::COLUMNS) {
        return Err(HarnessError::Log("column header does not match the schema".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| HarnessError::Log(e.to_string()))?;
        let values = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| HarnessError::Log(format!("row {}: {e}", i + 1)))?;
        rows.push(
            LogRow::from_values(&values)
                .ok_or_else(|| HarnessError::Log(format!("row {} has {} fields", i + 1, values.len())))?,
        );
    }
    Ok(rows)
}

pub fn write_summary(path: &Path, report: &MetricsReport) -> Result<(), HarnessError> {
    std::fs::write(path, report.summary()).map_err(io_err(path))
}

/// Writes the CSV and summary into `dir`, creating it if needed.
pub fn write_outputs(
    rows: &[LogRow],
    report: &MetricsReport,
    config: &ScenarioConfig,
    dir: &Path,
) -> Result<Artifacts, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let artifacts = Artifacts { csv: dir.join(&config.output.csv), summary: dir.join(&config.output.summary) };
    write_csv(&artifacts.csv, rows)?;
    write_summary(&artifacts.summary, report)?;
    Ok(artifacts)
}
