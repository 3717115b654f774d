//! Serializable reports for `estimate` and `test`. Both are flat records so
//! the same struct serves the JSON and the one-row CSV format.

use std::path::Path;

use serde::{Deserialize, Serialize};
use swd_core::rng::{GAUSSIAN_METHOD, GENERATOR};
use swd_core::{Analysis, InferenceReport, VarianceComponents, VarianceMode};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub generator: String,
    pub gaussian_method: String,
    pub seed: u64,
    pub p: f64,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub estimate: f64,
    pub w_hat_sq: Option<f64>,
    pub w_hat_clamped: Option<bool>,
    pub v_hat_pq_sq: Option<f64>,
    pub v_hat_qp_sq: Option<f64>,
    pub tau_hat: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub combined_variance: Option<f64>,
    pub variance_mode: Option<String>,
    pub level: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub generator: String,
    pub gaussian_method: String,
    pub seed: u64,
    pub p: f64,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub delta: f64,
    pub estimate: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub effective_rate: f64,
    pub w_hat_sq: f64,
    pub v_hat_pq_sq: f64,
    pub v_hat_qp_sq: f64,
    pub tau_hat: f64,
    pub lambda_hat: f64,
    pub combined_variance: f64,
    pub variance_mode: String,
}

pub fn mode_name(mode: VarianceMode) -> String {
    match mode {
        VarianceMode::Full => "full".into(),
        VarianceMode::SlicingOnly => "slicing-only".into(),
    }
}

impl EstimateReport {
    pub fn new(
        seed: u64,
        d: usize,
        analysis: &Analysis,
        variance: Option<&VarianceComponents>,
        level: f64,
        ci: Option<(f64, f64)>,
    ) -> Self {
        let e = &analysis.estimate;
        Self {
            generator: GENERATOR.into(),
            gaussian_method: GAUSSIAN_METHOD.into(),
            seed,
            p: e.p,
            d,
            n: e.n,
            m: e.m,
            k: e.k,
            estimate: e.sw_pp,
            w_hat_sq: analysis.w_hat.map(|w| w.value),
            w_hat_clamped: analysis.w_hat.map(|w| w.clamped),
            v_hat_pq_sq: variance.map(|v| v.v_hat_pq_sq).or(analysis.v_hat_pq_sq),
            v_hat_qp_sq: variance.map(|v| v.v_hat_qp_sq).or(analysis.v_hat_qp_sq),
            tau_hat: variance.map(|v| v.tau_hat),
            lambda_hat: variance.map(|v| v.lambda_hat),
            combined_variance: variance.map(|v| v.combined),
            variance_mode: variance.map(|v| mode_name(v.mode)),
            level,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
        }
    }
}

impl TestReport {
    pub fn new(seed: u64, p: f64, d: usize, n: usize, m: usize, k: usize, r: &InferenceReport) -> Self {
        Self {
            generator: GENERATOR.into(),
            gaussian_method: GAUSSIAN_METHOD.into(),
            seed,
            p,
            d,
            n,
            m,
            k,
            delta: r.delta,
            estimate: r.estimate,
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            level: r.level,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            effective_rate: r.effective_rate,
            w_hat_sq: r.variance.w_hat_sq,
            v_hat_pq_sq: r.variance.v_hat_pq_sq,
            v_hat_qp_sq: r.variance.v_hat_qp_sq,
            tau_hat: r.variance.tau_hat,
            lambda_hat: r.variance.lambda_hat,
            combined_variance: r.variance.combined,
            variance_mode: mode_name(r.variance.mode),
        }
    }
}

/// Renders a flat record as JSON (pretty, trailing newline) or as a CSV
/// header plus one row.
pub fn render<T: Serialize>(record: &T, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(record)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(record)?;
            let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

/// Inverse of [`render`].
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, format: Format) -> Result<T> {
    match format {
        Format::Json => Ok(serde_json::from_str(text)?),
        Format::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let row = r
                .deserialize()
                .next()
                .ok_or_else(|| Error::Input { path: "<report>".into(), message: "empty CSV report".into() })??;
            Ok(row)
        }
    }
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
