#![allow(dead_code)]

use std::path::Path;

use hypercs::harness::ExperimentConfig;
use hypercs::synth::{self, SceneSpec};

/// 16x16 release-like scene: 8 clean frames, plume on frames 10..=19.
pub fn small_scene(strength: f64) -> SceneSpec {
    let mut spec = synth::preset("release").unwrap();
    spec.n1 = 16;
    spec.n2 = 16;
    spec.frames = 22;
    spec.plume.center = (8.0, 7.0);
    spec.plume.sigma = 2.5;
    spec.plume.strength = (0..22).map(|t| if (10..20).contains(&t) { strength } else { 0.0 }).collect();
    spec
}

pub fn small_config(out: &Path, strength: f64) -> ExperimentConfig {
    ExperimentConfig {
        scene: Some(small_scene(strength)),
        background_frames: (0, 8),
        compression: 0.75,
        output: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}
