//! Experiment reports: Monte-Carlo summaries, fitted slopes, and named
//! pass/fail gates, serializable to JSON (lossless round trip) and CSV.

use super::config::ExperimentConfig;
use serde::{Deserialize, Serialize};

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueWithSe {
    pub value: f64,
    pub se: f64,
}

/// One row of a radius scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub n: u64,
    pub mean_radius_sq: f64,
    pub se: f64,
    pub coverage: f64,
    pub coverage_se: f64,
}

/// A named pass/fail comparison. `observed` and `threshold` carry the two
/// sides of the comparison; the direction depends on the gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
}

/// The output of one experiment run. A pure function of the configuration
/// (including its seed), byte-identical across re-runs and thread counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<ValueWithSe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_radius_sq: Option<ValueWithSe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_n: Option<Vec<ScanRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_slope: Option<ValueWithSe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_slope: Option<f64>,
    pub gates: Vec<Gate>,
    /// True when every gate passed.
    pub passed: bool,
}

impl ExperimentReport {
    /// Pretty JSON with a trailing newline. Serialization is canonical: the
    /// same report always produces identical bytes.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Config {
            field: "(report)",
            reason: e.to_string(),
        })
    }

    /// CSV rendering: the per-`n` table for scans, the gate table otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(records) = &self.per_n {
            out.push_str("n,mean_radius_sq,se,coverage,coverage_se\n");
            for r in records {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.n, r.mean_radius_sq, r.se, r.coverage, r.coverage_se
                ));
            }
        } else {
            out.push_str("gate,passed,observed,threshold\n");
            for g in &self.gates {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    g.name, g.passed, g.observed, g.threshold
                ));
            }
        }
        out
    }
}
