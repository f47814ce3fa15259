//! Artifact writers: results.csv, manifest.json, plot.svg.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::experiments::Table;
use crate::svg;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub library_version: &'static str,
    pub config: Option<&'a ExperimentConfig>,
    pub status: &'static str,
    pub wall_time_s: f64,
    pub errors: Vec<String>,
    pub summary: Value,
}

/// RFC-4180 quoting with LF record terminators.
pub fn write_csv(dir: &Path, table: &Table) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join("results.csv"))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub fn write_plot(dir: &Path, table: &Table) -> io::Result<()> {
    let Some(spec) = &table.plot else {
        return Ok(());
    };
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| Some((r.get(spec.x)?.parse().ok()?, r.get(spec.y)?.parse().ok()?)))
        .collect();
    let doc = svg::scatter(
        &spec.title,
        table.header[spec.x],
        table.header[spec.y],
        &pts,
        spec.log_x,
        spec.log_y,
    );
    fs::write(dir.join("plot.svg"), doc)
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> io::Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(io::Error::other)?;
    fs::write(dir.join("manifest.json"), text + "\n")
}
