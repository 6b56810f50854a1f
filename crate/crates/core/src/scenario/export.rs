use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::harness::RunReport;
use crate::domain::{codec, BatchId};
use crate::server::{Metric, Point, TwinServer};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Canonical JSON; byte-identical for identical runs.
pub fn report_json(report: &RunReport) -> Result<String, ExportError> {
    Ok(codec::to_string(report)?)
}

/// Raw stored points of one metric, ordered by timestamp.
pub fn metric_csv(server: &TwinServer, batch: &BatchId, metric: Metric) -> Result<String, ExportError> {
    let points = server.read_store(|store| store.raw(batch, metric));
    points_csv(&points)
}

pub fn points_csv(points: &[Point]) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "value", "valid"])?;
    for p in points {
        w.write_record([
            p.t.to_string(),
            codec::format_real(p.value),
            (if p.valid { "true" } else { "false" }).to_owned(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

/// Parses a file written by [`points_csv`].
pub fn read_points_csv(text: &str) -> Result<Vec<Point>, ExportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| Ok(row?)).collect()
}

fn transitions_csv(report: &RunReport) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["at_ms", "boot_id", "from", "to", "reason", "pressure"])?;
    for t in &report.transitions {
        let reason = serde_json::to_value(t.reason)?;
        w.write_record([
            t.at_ms.to_string(),
            t.boot_id.to_string(),
            t.from.to_string(),
            t.to.to_string(),
            reason.as_str().unwrap_or_default().to_owned(),
            codec::format_real(t.pressure.0),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

fn cycles_csv(report: &RunReport) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "started_at_ms", "completed_at_ms", "duration_ms", "direction", "max_pressure"])?;
    for c in &report.cycles {
        let direction = serde_json::to_value(c.direction)?;
        w.write_record([
            c.index.to_string(),
            c.started_at_ms.to_string(),
            c.completed_at_ms.to_string(),
            c.duration_ms.to_string(),
            direction.as_str().unwrap_or_default().to_owned(),
            codec::format_real(c.max_pressure.0),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

fn alerts_csv(report: &RunReport) -> Result<String, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alert_id", "raised_at", "severity", "condition", "metric", "observed", "threshold"])?;
    for a in &report.alerts {
        let severity = serde_json::to_value(a.severity)?;
        w.write_record([
            a.alert_id.to_string(),
            a.raised_at.to_string(),
            severity.as_str().unwrap_or_default().to_owned(),
            a.condition.as_str().to_owned(),
            a.metric.clone().unwrap_or_default(),
            codec::format_real(a.observed),
            codec::format_real(a.threshold),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

/// Writes `report.json`, `cycles.csv`, `transitions.csv`, `alerts.csv` and one
/// `<metric>.csv` per stored metric into `dir`.
pub fn export_run(
    dir: &Path,
    report: &RunReport,
    server: &TwinServer,
    batch: &BatchId,
) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(dir)?;
    let mut files = vec![
        ("report.json".to_owned(), report_json(report)? + "\n"),
        ("cycles.csv".to_owned(), cycles_csv(report)?),
        ("transitions.csv".to_owned(), transitions_csv(report)?),
        ("alerts.csv".to_owned(), alerts_csv(report)?),
    ];
    let metrics = server.read_store(|store| store.metrics(batch));
    for metric in metrics {
        files.push((format!("{}.csv", metric.as_str()), metric_csv(server, batch, metric)?));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
