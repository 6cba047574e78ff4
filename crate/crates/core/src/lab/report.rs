//! Suite reports and plot-ready series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::SuiteConfig;
use crate::error::{Error, Result};
use crate::grid::io::to_bytes;
use crate::grid::GridFunction;

/// One executed check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The property checked, or `plumbing` for infrastructure checks.
    pub anchor: String,
    /// SHA-256 of the check's input functions and parameters.
    pub inputs_hash: String,
    pub measured: BTreeMap<String, f64>,
    /// The number the decisive measurement is compared against.
    pub threshold: f64,
    pub passed: bool,
    /// Command line reproducing the check; present on failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Plot-ready rows with named columns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: SuiteConfig,
    pub checks: Vec<CheckRecord>,
    pub series: BTreeMap<String, Series>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn new(config: SuiteConfig, checks: Vec<CheckRecord>, series: BTreeMap<String, Series>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            suite: config.suite.name().to_string(),
            config,
            checks,
            series,
            passed,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Incremental SHA-256 over check inputs.
pub struct InputsHash(Sha256);

impl InputsHash {
    pub fn new(label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(label.as_bytes());
        Self(h)
    }

    pub fn function(mut self, f: &GridFunction) -> Self {
        self.0.update(to_bytes(f));
        self
    }

    pub fn text(mut self, s: &str) -> Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Columns of each known series.
pub const SERIES: [(&str, &[&str]); 2] = [
    ("annular-decay", &["k", "normalized_norm", "reference"]),
    ("duality-gap", &["iteration", "lower", "upper"]),
];

/// CSV for one series; a report without that series gives the header only.
pub fn emit_plotdata(report: &SuiteReport, series: &str) -> Result<String> {
    let (_, columns) = SERIES
        .iter()
        .find(|(n, _)| *n == series)
        .ok_or_else(|| Error::Unknown {
            kind: "series",
            name: series.into(),
        })?;
    let mut out = columns.join(",");
    out.push('\n');
    if let Some(s) = report.series.get(series) {
        for row in &s.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::config::SuiteName;

    #[test]
    fn empty_report_gives_header_only() {
        let r = SuiteReport::new(SuiteConfig::defaults(SuiteName::Io), vec![], BTreeMap::new());
        assert_eq!(emit_plotdata(&r, "annular-decay").unwrap(), "k,normalized_norm,reference\n");
        assert_eq!(emit_plotdata(&r, "duality-gap").unwrap(), "iteration,lower,upper\n");
        assert!(emit_plotdata(&r, "nope").is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut series = BTreeMap::new();
        series.insert(
            "duality-gap".to_string(),
            Series {
                columns: vec!["iteration".into(), "lower".into(), "upper".into()],
                rows: vec![vec![0.0, 0.5, 0.75]],
            },
        );
        let r = SuiteReport::new(SuiteConfig::defaults(SuiteName::Duality), vec![], series);
        let back = SuiteReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(emit_plotdata(&back, "duality-gap").unwrap(), "iteration,lower,upper\n0.0,0.5,0.75\n");
    }
}
