//! Stream CSV files: header `index,value`, one value per row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Classify, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Row {
    pub index: u64,
    pub value: f64,
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).bad_input(format!("cannot read {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).runtime(format!("cannot write {}", path.display()))
}

pub fn parse_stream(text: &str) -> anyhow::Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    if !text.trim().is_empty() {
        let headers = reader.headers()?;
        if headers.iter().collect::<Vec<_>>() != ["index", "value"] {
            anyhow::bail!(
                "expected header `index,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            );
        }
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        let row: Row = rec?;
        if !row.value.is_finite() {
            anyhow::bail!("row {} has a non-finite value", row.index);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_stream(path: &Path) -> CliResult<Vec<Row>> {
    parse_stream(&read_text(path)?).bad_input(format!("malformed stream file {}", path.display()))
}

pub fn format_stream(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{i},{v}").expect("string write");
    }
    out
}
