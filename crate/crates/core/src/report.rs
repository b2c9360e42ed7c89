//! Result files: `results.csv` and the run manifest.
//!
//! CSV columns, in order: `scheme,n,metric,mean,stderr,drops,seed`. One row
//! per (scheme, n, metric), schemes and `n` in configured order, metrics in
//! [`Metric::ALL`] order. Numbers use `.` as the decimal point, no digit
//! grouping, and 12 significant digits (`%.12g`). A missing standard error
//! (single drop) is written as `NA`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::simulation::{Metric, SweepResult};

pub const CSV_HEADER: &str = "scheme,n,metric,mean,stderr,drops,seed";

/// `printf("%.12g")` formatting, independent of locale.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(result: &SweepResult, seed: u64, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for cell in &result.cells {
        for (metric, summary) in Metric::ALL.iter().zip(&cell.summaries) {
            let stderr = summary.stderr.map_or_else(|| "NA".to_string(), format_sig);
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                cell.scheme,
                cell.n,
                metric.name(),
                format_sig(summary.mean),
                stderr,
                cell.drops,
                seed
            )?;
        }
    }
    Ok(())
}

pub fn csv_string(result: &SweepResult, seed: u64) -> String {
    let mut buf = Vec::new();
    write_csv(result, seed, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub scheme: String,
    pub n: usize,
    pub drops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool_version: String,
    pub master_seed: u64,
    /// Seconds since the Unix epoch when the run finished.
    pub timestamp: u64,
    pub cells: Vec<CellCount>,
}

/// Sidecar written next to `results.csv`. The `config` table is the fully
/// resolved configuration, so `sweep --manifest` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run: RunInfo,
    pub config: ConfigFile,
}

impl RunManifest {
    pub fn new(config: ConfigFile, result: &SweepResult, timestamp: u64) -> Self {
        let cells = result
            .cells
            .iter()
            .map(|c| CellCount {
                scheme: c.scheme.to_string(),
                n: c.n,
                drops: c.drops,
            })
            .collect();
        Self {
            run: RunInfo {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                master_seed: config.scenario.master_seed,
                timestamp,
                cells,
            },
            config,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
