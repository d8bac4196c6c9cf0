//! Detection thresholds calibrated on background cubes.
//!
//! Each background cube contributes the order statistic at 0-based index
//! `ceil(alpha * N / 100)` of its detection values; the threshold is `beta`
//! times the median of those cuts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionMap;
use crate::error::{param_err, Result};

/// Multipliers of `T` used for the robustness sweep.
pub const SWEEP_MULTIPLIERS: [f64; 7] = [0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15];

pub const DEFAULT_ALPHA: f64 = 99.0;
pub const BETA_RAW: f64 = 1.0;
pub const BETA_RECONSTRUCTED: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeCut {
    pub id: String,
    pub cut: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub sweep: Vec<f64>,
    pub provenance: Vec<CubeCut>,
}

impl ThresholdSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        validate_alpha_beta(spec.alpha, spec.beta)?;
        Ok(spec)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn validate_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 100.0) {
        return param_err(format!("alpha must lie in (0, 100), got {alpha}"));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return param_err(format!("beta must be positive, got {beta}"));
    }
    Ok(())
}

pub fn percentile_cut(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return param_err("percentile of an empty set");
    }
    if values.iter().any(|v| v.is_nan()) {
        return param_err("percentile input contains NaN");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (alpha * sorted.len() as f64 / 100.0).ceil() as usize;
    Ok(sorted[idx.min(sorted.len() - 1)])
}

/// Even counts average the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return param_err("median of an empty set");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 { sorted[m] } else { 0.5 * (sorted[m - 1] + sorted[m]) })
}

/// `sets` pairs a background cube id with its detection values.
pub fn compute_threshold<S: AsRef<[f64]>>(sets: &[(String, S)], alpha: f64, beta: f64) -> Result<ThresholdSpec> {
    validate_alpha_beta(alpha, beta)?;
    if sets.is_empty() {
        return param_err("threshold needs at least one background cube");
    }
    let provenance = sets
        .iter()
        .map(|(id, v)| Ok(CubeCut { id: id.clone(), cut: percentile_cut(v.as_ref(), alpha)? }))
        .collect::<Result<Vec<_>>>()?;
    let cuts: Vec<f64> = provenance.iter().map(|c| c.cut).collect();
    let t = beta * median(&cuts)?;
    Ok(ThresholdSpec { alpha, beta, t, sweep: make_sweep(t), provenance })
}

pub fn make_sweep(t: f64) -> Vec<f64> {
    SWEEP_MULTIPLIERS.iter().map(|m| m * t).collect()
}

pub fn count_over(map: &DetectionMap, t: f64) -> usize {
    map.values.iter().filter(|&&v| v > t).count()
}
