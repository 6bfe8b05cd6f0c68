//! Long-format experiment reports shared by the study runners and the CLI.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats;

/// Bumped whenever the CSV columns or JSON fields change.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 6] = ["experiment", "forecaster", "rule", "threshold", "value", "mc_se"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub forecaster: String,
    pub rule: String,
    pub threshold: Option<f64>,
    pub value: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub replications: usize,
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, seed: u64, replications: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed,
            replications,
            rows: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        experiment: &str,
        forecaster: &str,
        rule: &str,
        threshold: Option<f64>,
        value: f64,
        mc_se: f64,
    ) {
        self.rows.push(ReportRow {
            experiment: experiment.to_string(),
            forecaster: forecaster.to_string(),
            rule: rule.to_string(),
            threshold,
            value,
            mc_se,
        });
    }

    /// Mean of `xs` with its standard error.
    pub fn push_mean(&mut self, experiment: &str, forecaster: &str, rule: &str, threshold: Option<f64>, xs: &[f64]) {
        let (m, se) = stats::mean_se(xs);
        self.push(experiment, forecaster, rule, threshold, m, se);
    }

    /// Rejection frequency `hits / n` with its binomial standard error.
    pub fn push_proportion(
        &mut self,
        experiment: &str,
        forecaster: &str,
        rule: &str,
        threshold: Option<f64>,
        hits: usize,
        n: usize,
    ) {
        let (p, se) = stats::proportion_se(hits, n);
        self.push(experiment, forecaster, rule, threshold, p, se);
    }

    pub fn diagnose(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// First row matching all keys; thresholds compare exactly.
    pub fn find(&self, experiment: &str, forecaster: &str, rule: &str, threshold: Option<f64>) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.experiment == experiment && r.forecaster == forecaster && r.rule == rule && r.threshold == threshold
        })
    }

    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }

    pub fn cell_count(&self) -> usize {
        self.rows.len()
    }

    pub fn append(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
        self.diagnostics.extend(other.diagnostics);
    }

    /// CSV with a `#` metadata line, the long-format table, and diagnostics
    /// as trailing `#` lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# schema_version={} experiment={} seed={} replications={}",
            self.schema_version, self.experiment, self.seed, self.replications
        )?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(CSV_HEADER)?;
            for r in &self.rows {
                let threshold = r.threshold.map(|t| t.to_string()).unwrap_or_default();
                w.write_record([
                    r.experiment.as_str(),
                    r.forecaster.as_str(),
                    r.rule.as_str(),
                    &threshold,
                    &r.value.to_string(),
                    &r.mc_se.to_string(),
                ])?;
            }
            w.flush()?;
        }
        for d in &self.diagnostics {
            writeln!(out, "# diagnostic {} passed={} {}", d.name, d.passed, d.detail)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("report CSV is UTF-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo", 7, 10);
        r.push("demo", "perfect", "crps", None, 0.46, 0.003);
        r.push_proportion("demo", "normal", "cl", Some(-1.5), 3, 10);
        r.diagnose("ordering", true, "perfect < extremist");
        r
    }

    #[test]
    fn csv_layout() {
        let s = sample().to_csv_string().unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# schema_version=1 experiment=demo seed=7 replications=10");
        assert_eq!(lines[1], "experiment,forecaster,rule,threshold,value,mc_se");
        assert_eq!(lines[2], "demo,perfect,crps,,0.46,0.003");
        assert!(lines[3].starts_with("demo,normal,cl,-1.5,0.3,"));
        assert_eq!(lines[4], "# diagnostic ordering passed=true perfect < extremist");
    }

    #[test]
    fn json_roundtrip_and_lookup() {
        let r = sample();
        let back: ExperimentReport = serde_json::from_str(&r.to_json_string().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.find("demo", "normal", "cl", Some(-1.5)).unwrap().value, 0.3);
        assert!(r.find("demo", "normal", "cl", None).is_none());
        assert_eq!(r.cell_count(), 2);
        assert!(r.diagnostic("ordering").unwrap().passed);
    }
}
