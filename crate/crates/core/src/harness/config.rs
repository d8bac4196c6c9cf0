use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{Centering, Statistic};
use crate::error::{param_err, Result};
use crate::sampling::OrderingKind;
use crate::solver::{Method, SolverParams};
use crate::synth::SceneSpec;
use crate::threshold::{BETA_RAW, BETA_RECONSTRUCTED, DEFAULT_ALPHA};

/// Spatial window applied to every frame before sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fov {
    pub origin: (usize, usize),
    pub size: (usize, usize),
}

/// Full experiment description. Exactly one of `preset`, `scene` and
/// `input` selects the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub scene: Option<SceneSpec>,
    /// Directory holding a cube sequence (HSC1 frames plus manifest).
    pub input: Option<PathBuf>,
    /// Signature CSV path or bundled signature name. Defaults to the
    /// scene's signature.
    pub signature: Option<String>,
    /// Overrides the scene seed and seeds random plans.
    pub seed: Option<u64>,
    pub fov: Option<Fov>,
    pub compression: f64,
    pub ordering: OrderingKind,
    pub methods: Vec<Method>,
    pub statistics: Vec<Statistic>,
    pub alpha: f64,
    pub beta_raw: f64,
    pub beta_recon: f64,
    /// Half-open frame range `[start, end)` of plume-free frames used for
    /// plan training, background covariance and thresholds.
    pub background_frames: (usize, usize),
    pub centering: Centering,
    pub solver: SolverParams,
    pub output: PathBuf,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            scene: None,
            input: None,
            signature: None,
            seed: None,
            fov: None,
            compression: 0.9,
            ordering: OrderingKind::MaxVariance,
            methods: vec![Method::L1, Method::Tv],
            statistics: Statistic::ALL.to_vec(),
            alpha: DEFAULT_ALPHA,
            beta_raw: BETA_RAW,
            beta_recon: BETA_RECONSTRUCTED,
            background_frames: (0, 30),
            centering: Centering::Both,
            solver: SolverParams::default(),
            output: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn for_preset(name: &str) -> Self {
        Self { preset: Some(name.to_string()), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [self.preset.is_some(), self.scene.is_some(), self.input.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return param_err("config needs exactly one of `preset`, `scene` or `input`");
        }
        if !(self.compression > 0.0 && self.compression < 1.0) {
            return param_err(format!("compression must lie in (0, 1), got {}", self.compression));
        }
        if self.methods.is_empty() {
            return param_err("config lists no reconstruction methods");
        }
        if self.statistics.is_empty() {
            return param_err("config lists no detection statistics");
        }
        let (start, end) = self.background_frames;
        if start >= end {
            return param_err(format!("background frame range [{start}, {end}) is empty"));
        }
        if !(self.alpha > 0.0 && self.alpha < 100.0) {
            return param_err(format!("alpha must lie in (0, 100), got {}", self.alpha));
        }
        if !(self.beta_raw > 0.0 && self.beta_recon > 0.0) {
            return param_err("beta values must be positive");
        }
        if self.workers == Some(0) {
            return param_err("workers must be at least 1");
        }
        self.solver.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the compact JSON form, ignoring `output` and `workers`,
    /// which do not change results.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self { output: PathBuf::new(), workers: None, ..self.clone() };
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&canonical)?)))
    }
}
