//! Common result record for Monte Carlo experiments.

use serde::Serialize;
use std::collections::BTreeMap;

/// Point estimate with a 95% confidence interval, the seed that
/// regenerates it bit for bit, and named extras specific to the
/// experiment. `details` is ordered so serialized output is stable.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub n_paths: usize,
    pub master_seed: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored_fraction: f64,
    pub details: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
