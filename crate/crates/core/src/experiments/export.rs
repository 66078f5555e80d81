//! Writing sweep results and their run manifest to disk.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use super::sweep::SweepResult;
use crate::config::content_hash;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

/// Manifest describing how a result set was produced.
pub fn manifest(result: &SweepResult, format: Format) -> Result<serde_json::Value> {
    let config_text = result.config.to_kv_string();
    let spec = serde_json::to_string(&result.spec)?;
    let hash = content_hash(format!("{config_text}\n{spec}").as_bytes());
    let name = result.spec.experiment.as_str();
    let tables: Vec<serde_json::Value> = result
        .tables
        .iter()
        .map(|t| {
            json!({
                "name": t.name,
                "file": format!("{name}_{}.{}", t.name, format.extension()),
                "columns": t.columns,
                "rows": t.rows.len(),
            })
        })
        .collect();
    Ok(json!({
        "experiment": name,
        "spec": result.spec,
        "points": result.points,
        "seed": result.config.seed,
        "input_hash": hash,
        "config": result.config,
        "config_text": config_text,
        "tables": tables,
    }))
}

/// Writes every table plus `<experiment>_manifest.json` into `dir`; returns the paths.
pub fn export(result: &SweepResult, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = result.spec.experiment.as_str();
    let mut written = Vec::new();
    for t in &result.tables {
        let path = dir.join(format!("{name}_{}.{}", t.name, format.extension()));
        let body = match format {
            Format::Csv => t.to_csv(),
            Format::Json => t.to_json() + "\n",
        };
        std::fs::write(&path, body)?;
        written.push(path);
    }
    let path = dir.join(format!("{name}_manifest.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest(result, format)?)? + "\n")?;
    written.push(path);
    Ok(written)
}
