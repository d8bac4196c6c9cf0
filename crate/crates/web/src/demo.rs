use hypercs::detection::{ace_map, bulk_coherence, BackgroundModel, DetectionMap};
use hypercs::sampling::{build_plan, sample_cube, Ordering};
use hypercs::synth::{self, BackgroundSpec, PlumeSpec, SceneSpec};
use hypercs::threshold::{compute_threshold, count_over, ThresholdSpec};
use hypercs::{CubeSequence, HyperCube, Method, Result, Signature, SolverParams};

pub const SIDE: usize = 32;
pub const BANDS: usize = 20;
const BACKGROUND_FRAMES: usize = 8;
const SEED: u64 = 7;

/// Eight clean frames followed by one plume frame at `strength`. The
/// background carries extra spectral components and sensor noise so raw
/// ACE thresholds are well away from zero.
pub fn scene_spec(strength: f64) -> SceneSpec {
    let frames = BACKGROUND_FRAMES + 1;
    let mut strengths = vec![0.0; frames];
    strengths[BACKGROUND_FRAMES] = strength;
    SceneSpec {
        n1: SIDE,
        n2: SIDE,
        b: BANDS,
        frames,
        seed: SEED,
        background: BackgroundSpec {
            mean: synth::default_mean(BANDS),
            covariance_scale: 0.1,
            smoothing_radius: 2,
            extra_components: 3,
            extra_scale: 0.3,
            noise_std: 0.05,
        },
        plume: PlumeSpec {
            center: (16.0, 14.0),
            sigma: 3.5,
            signature: synth::DEFAULT_SIGNATURE.into(),
            strength: strengths,
        },
        notes: String::new(),
    }
}

fn scene(strength: f64) -> Result<(CubeSequence, Signature)> {
    let sig = synth::preset_signature(synth::DEFAULT_SIGNATURE)?;
    Ok((synth::generate(&scene_spec(strength), &sig)?, sig))
}

fn single_band(cube: &HyperCube, band: usize) -> Result<HyperCube> {
    HyperCube::new(cube.n1(), cube.n2(), 1, cube.band(band).to_vec())
}

#[derive(Debug, Clone)]
pub struct BandReconstruction {
    pub truth: Vec<f64>,
    pub recon: Vec<f64>,
    pub rel_error: f64,
    pub iterations: usize,
    pub measurements: usize,
}

/// Samples one band of the plume frame with a max-variance plan trained on
/// the clean frames and reconstructs it.
pub fn reconstruct_band(method: Method, compression: f64, strength: f64, band: usize) -> Result<BandReconstruction> {
    if band >= BANDS {
        return Err(hypercs::Error::InvalidParameter(format!("band {band} out of range")));
    }
    let (seq, _) = scene(strength)?;
    let frames = seq.frames();
    let training =
        CubeSequence::new(frames[..BACKGROUND_FRAMES].iter().map(|f| single_band(f, band)).collect::<Result<_>>()?)?;
    let plan = build_plan(SIDE * SIDE, compression, Ordering::MaxVariance(&training), SEED)?;
    let truth = single_band(&frames[BACKGROUND_FRAMES], band)?;
    let y = sample_cube(&plan, &truth)?;
    let res = hypercs::solver::reconstruct(method, &y, &plan, (SIDE, SIDE), &SolverParams::default())?;
    let recon = res.cube.as_slice().to_vec();
    let truth = truth.as_slice().to_vec();
    let num: f64 = recon.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    Ok(BandReconstruction { truth, recon, rel_error: (num / den).sqrt(), iterations: res.iterations, measurements: plan.k })
}

#[derive(Debug, Clone)]
pub struct FrameDetection {
    pub ace: DetectionMap,
    pub bulk: DetectionMap,
    pub ace_threshold: ThresholdSpec,
    pub bulk_threshold: ThresholdSpec,
}

impl FrameDetection {
    /// Pixels over `multiplier * T` for `ace` (`bulk == false`) or bulk.
    pub fn count(&self, bulk: bool, multiplier: f64) -> usize {
        if bulk {
            count_over(&self.bulk, multiplier * self.bulk_threshold.t)
        } else {
            count_over(&self.ace, multiplier * self.ace_threshold.t)
        }
    }
}

/// ACE and bulk maps of the plume frame, thresholds from the clean frames
/// with the raw-data convention.
pub fn detect(strength: f64) -> Result<FrameDetection> {
    let (seq, sig) = scene(strength)?;
    let frames = seq.frames();
    let bg = BackgroundModel::from_cubes(&frames[..BACKGROUND_FRAMES])?;
    let maps = frames.iter().enumerate().map(|(t, f)| ace_map(f, &sig, &bg, t)).collect::<Result<Vec<_>>>()?;
    let bulk: Vec<DetectionMap> = maps.iter().map(bulk_coherence).collect();
    let sets = |ms: &[DetectionMap]| -> Vec<(String, Vec<f64>)> {
        ms[..BACKGROUND_FRAMES].iter().map(|m| (format!("frame_{}", m.frame), m.values.clone())).collect()
    };
    let beta = hypercs::threshold::BETA_RAW;
    let ace_threshold = compute_threshold(&sets(&maps), hypercs::threshold::DEFAULT_ALPHA, beta)?;
    let bulk_threshold = compute_threshold(&sets(&bulk), hypercs::threshold::DEFAULT_ALPHA, beta)?;
    Ok(FrameDetection {
        ace: maps[BACKGROUND_FRAMES].clone(),
        bulk: bulk[BACKGROUND_FRAMES].clone(),
        ace_threshold,
        bulk_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruction_improves_with_more_measurements() {
        let coarse = reconstruct_band(Method::L1, 0.9, 2.0, 6).unwrap();
        let fine = reconstruct_band(Method::L1, 0.5, 2.0, 6).unwrap();
        assert_eq!((coarse.measurements, fine.measurements), (102, 512));
        assert!(fine.rel_error < coarse.rel_error);
        assert!(reconstruct_band(Method::Tv, 0.75, 2.0, 6).unwrap().rel_error < 0.05);
        assert!(reconstruct_band(Method::Tv, 0.75, 2.0, BANDS).is_err());
    }

    #[test]
    fn stronger_plumes_light_up_more_pixels() {
        let none = detect(0.0).unwrap();
        let strong = detect(3.0).unwrap();
        assert!(none.count(true, 1.0) < 50);
        assert!(strong.count(true, 1.0) > none.count(true, 1.0) + 20);
        let peak = strong.ace.get(16, 14);
        assert!(peak > strong.ace_threshold.t);
        assert!(strong.count(false, 0.85) >= strong.count(false, 1.15));
    }
}
