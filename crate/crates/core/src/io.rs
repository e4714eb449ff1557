//! Sample files and run manifests.
//!
//! Samples CSV: header `t,lambda_1,…,lambda_N`, one row per recorded
//! spectrum, `,` separator, LF line endings, shortest round-trip decimals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_stats::SpectrumSample;

pub fn write_samples_csv<W: Write>(mut out: W, samples: &[SpectrumSample]) -> Result<()> {
    let n = samples.first().map_or(0, |s| s.lambdas.len());
    write!(out, "t")?;
    for i in 1..=n {
        write!(out, ",lambda_{i}")?;
    }
    writeln!(out)?;
    for s in samples {
        if s.lambdas.len() != n {
            return Err(Error::Domain("all samples must have the same number of eigenvalues".into()));
        }
        write!(out, "{}", s.t)?;
        for l in &s.lambdas {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_samples_csv(text: &str) -> Result<Vec<SpectrumSample>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty samples file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.iter().skip(1).enumerate().any(|(i, c)| *c != format!("lambda_{}", i + 1)) {
        return Err(Error::Parse("samples header must be t,lambda_1,…,lambda_N".into()));
    }
    let n = cols.len() - 1;
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", k + 2)))?;
        if vals.len() != n + 1 {
            return Err(Error::Parse(format!("line {}: expected {} columns, got {}", k + 2, n + 1, vals.len())));
        }
        out.push(SpectrumSample { t: vals[0], lambdas: vals[1..].to_vec() });
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out)
}

/// Record of a run: enough to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    #[serde(default)]
    pub counters: serde_json::Value,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            counters: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
