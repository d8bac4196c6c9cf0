//! Deterministic synthetic plume scenes.
//!
//! A background pixel is `mean + sum_r z_r(p) * basis_r + noise`, where each
//! `z_r` is a unit-variance Gaussian field smoothed by a periodic box filter
//! and `basis_0 = covariance_scale * mean` models illumination. Extra
//! components use random smooth spectral shapes. Every frame draws from its
//! own ChaCha8 stream, so frames can be generated in any order.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cube::{CubeSequence, HyperCube};
use crate::detection::Signature;
use crate::error::{dim_err, param_err, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub mean: Vec<f64>,
    /// Standard deviation of the illumination field relative to `mean`.
    pub covariance_scale: f64,
    pub smoothing_radius: usize,
    /// Additional independent fields with random smooth spectra.
    #[serde(default)]
    pub extra_components: usize,
    /// Amplitude of each extra component's spectrum.
    #[serde(default)]
    pub extra_scale: f64,
    /// Per-band white noise standard deviation.
    #[serde(default)]
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlumeSpec {
    pub center: (f64, f64),
    pub sigma: f64,
    pub signature: String,
    /// Peak amplitude per frame.
    pub strength: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n1: usize,
    pub n2: usize,
    pub b: usize,
    pub frames: usize,
    pub seed: u64,
    pub background: BackgroundSpec,
    pub plume: PlumeSpec,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.b == 0 || self.frames == 0 {
            return param_err("scene dimensions must all be at least 1");
        }
        if self.background.mean.len() != self.b {
            return dim_err(format!("mean spectrum has {} bands, scene {}", self.background.mean.len(), self.b));
        }
        if self.plume.strength.len() != self.frames {
            return dim_err(format!(
                "strength schedule has {} entries for {} frames",
                self.plume.strength.len(),
                self.frames
            ));
        }
        if !(self.plume.sigma.is_finite() && self.plume.sigma > 0.0) {
            return param_err(format!("plume sigma must be positive, got {}", self.plume.sigma));
        }
        let bg = &self.background;
        let reals = bg.mean.iter().chain(&self.plume.strength).chain([
            &bg.covariance_scale,
            &bg.extra_scale,
            &bg.noise_std,
            &self.plume.center.0,
            &self.plume.center.1,
        ]);
        if reals.into_iter().any(|v| !v.is_finite()) {
            return param_err("scene contains non-finite values");
        }
        if bg.covariance_scale < 0.0 || bg.extra_scale < 0.0 || bg.noise_std < 0.0 {
            return param_err("background scales must be nonnegative");
        }
        Ok(())
    }

    /// Frames whose plume strength is nonzero.
    pub fn active_frames(&self) -> Vec<usize> {
        (0..self.frames).filter(|&t| self.plume.strength[t] != 0.0).collect()
    }

    /// Spectral basis vectors scaled to their per-band standard deviations.
    pub fn components(&self) -> Vec<Vec<f64>> {
        let bg = &self.background;
        let mut out = vec![bg.mean.iter().map(|m| m * bg.covariance_scale).collect::<Vec<_>>()];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        for _ in 0..bg.extra_components {
            out.push(smooth_spectrum(self.b, 4, &mut rng).into_iter().map(|v| v * bg.extra_scale).collect());
        }
        out
    }

    /// Per-band variance implied by the background parameters.
    pub fn band_variances(&self) -> Vec<f64> {
        let comps = self.components();
        (0..self.b)
            .map(|j| comps.iter().map(|c| c[j] * c[j]).sum::<f64>() + self.background.noise_std.powi(2))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
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

/// Uniform cubic B-spline with `knots` random coefficients in `[-1, 1]`,
/// sampled at `b` points.
pub fn smooth_spectrum(b: usize, knots: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let coeffs: Vec<f64> = (0..knots + 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..b)
        .map(|j| {
            let x = if b > 1 { j as f64 / (b - 1) as f64 * knots as f64 } else { 0.0 };
            let i = (x.floor() as usize).min(knots - 1);
            let u = x - i as f64;
            let w = [
                (1.0 - u).powi(3) / 6.0,
                (3.0 * u.powi(3) - 6.0 * u * u + 4.0) / 6.0,
                (-3.0 * u.powi(3) + 3.0 * u * u + 3.0 * u + 1.0) / 6.0,
                u.powi(3) / 6.0,
            ];
            (0..4).map(|m| w[m] * coeffs[i + m]).sum()
        })
        .collect()
}

/// Sum of Gaussian bumps `(center, width, height)` over the band axis.
pub fn gaussian_peaks(b: usize, peaks: &[(f64, f64, f64)]) -> Vec<f64> {
    (0..b)
        .map(|j| peaks.iter().map(|&(c, w, h)| h * (-0.5 * ((j as f64 - c) / w).powi(2)).exp()).sum())
        .collect()
}

fn frame_rng(seed: u64, frame: usize, field: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((frame as u64) << 16) | field as u64);
    rng
}

/// Periodic box filter of half-width `radius`, scaled to keep white input
/// at unit variance.
fn smooth_field(field: &mut [f64], n1: usize, n2: usize, radius: usize) {
    if radius == 0 {
        return;
    }
    let width = 2 * radius + 1;
    let norm = 1.0 / (width as f64).sqrt();
    let mut tmp = vec![0.0; field.len()];
    for r in 0..n1 {
        for c in 0..n2 {
            tmp[r * n2 + c] = (0..width).map(|d| field[r * n2 + (c + n2 * width + d - radius) % n2]).sum::<f64>() * norm;
        }
    }
    for r in 0..n1 {
        for c in 0..n2 {
            field[r * n2 + c] = (0..width).map(|d| tmp[((r + n1 * width + d - radius) % n1) * n2 + c]).sum::<f64>() * norm;
        }
    }
}

fn background_frame(spec: &SceneSpec, comps: &[Vec<f64>], frame: usize) -> Result<HyperCube> {
    let (n1, n2, b) = (spec.n1, spec.n2, spec.b);
    let n = n1 * n2;
    let bg = &spec.background;
    let mut data: Vec<f64> = (0..b).flat_map(|j| std::iter::repeat_n(bg.mean[j], n)).collect();
    for (r, comp) in comps.iter().enumerate() {
        if comp.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut rng = frame_rng(spec.seed, frame, r);
        let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        smooth_field(&mut z, n1, n2, bg.smoothing_radius);
        for (j, &a) in comp.iter().enumerate() {
            for (d, zp) in data[j * n..(j + 1) * n].iter_mut().zip(&z) {
                *d += a * zp;
            }
        }
    }
    if bg.noise_std > 0.0 {
        let mut rng = frame_rng(spec.seed, frame, comps.len());
        for d in data.iter_mut() {
            *d += bg.noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    HyperCube::new(n1, n2, b, data)
}

pub fn gen_background(spec: &SceneSpec) -> Result<CubeSequence> {
    spec.validate()?;
    let comps = spec.components();
    let frames = par::map_indexed(spec.frames, |t| background_frame(spec, &comps, t));
    CubeSequence::new(frames.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Spatial footprint `exp(-d^2 / (2 sigma^2))` of the plume.
pub fn plume_footprint(spec: &SceneSpec) -> Vec<f64> {
    let (cr, cc) = spec.plume.center;
    let s2 = 2.0 * spec.plume.sigma * spec.plume.sigma;
    (0..spec.n1 * spec.n2)
        .map(|p| {
            let (r, c) = ((p / spec.n2) as f64, (p % spec.n2) as f64);
            (-((r - cr).powi(2) + (c - cc).powi(2)) / s2).exp()
        })
        .collect()
}

pub fn inject_plume(cubes: &CubeSequence, sig: &Signature, spec: &SceneSpec) -> Result<CubeSequence> {
    spec.validate()?;
    if cubes.len() != spec.frames || cubes.shape() != Some((spec.n1, spec.n2, spec.b)) {
        return dim_err("cube sequence does not match the scene spec");
    }
    if sig.bands() != spec.b {
        return dim_err(format!("signature has {} bands, scene {}", sig.bands(), spec.b));
    }
    let footprint = plume_footprint(spec);
    let n = spec.n1 * spec.n2;
    let frames = cubes
        .frames()
        .iter()
        .zip(&spec.plume.strength)
        .map(|(cube, &a)| {
            if a == 0.0 {
                return Ok(cube.clone());
            }
            let data = cube
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, &v)| v + a * footprint[i % n] * sig.values[i / n])
                .collect();
            HyperCube::new(spec.n1, spec.n2, spec.b, data)
        })
        .collect::<Result<Vec<_>>>()?;
    CubeSequence::new(frames)
}

/// Background plus plume for every frame.
pub fn generate(spec: &SceneSpec, sig: &Signature) -> Result<CubeSequence> {
    inject_plume(&gen_background(spec)?, sig, spec)
}

pub const PRESET_NAMES: [&str; 2] = ["release", "dissipated_return"];
pub const DEFAULT_SIGNATURE: &str = "plume_a";

const STRONG: f64 = 3.0;
const WEAK_FRACTION: f64 = 0.25;

/// Signature CSVs bundled with the library, by name.
pub fn preset_signature(name: &str) -> Result<Signature> {
    let text = match name {
        "plume_a" => include_str!("../presets/signatures/plume_a.csv"),
        "plume_b" => include_str!("../presets/signatures/plume_b.csv"),
        other => return param_err(format!("unknown signature preset {other:?}")),
    };
    Signature::from_csv_str(name, text)
}

/// The default mean spectrum: a smooth positive curve around 10.
pub fn default_mean(b: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    smooth_spectrum(b, 4, &mut rng).into_iter().map(|v| 10.0 * (1.0 + 0.3 * v)).collect()
}

fn base_spec(frames: usize, strength: Vec<f64>) -> SceneSpec {
    SceneSpec {
        n1: 64,
        n2: 64,
        b: 20,
        frames,
        seed: 20240601,
        background: BackgroundSpec {
            mean: default_mean(20),
            covariance_scale: 0.1,
            smoothing_radius: 2,
            extra_components: 0,
            extra_scale: 0.0,
            noise_std: 0.0,
        },
        plume: PlumeSpec { center: (32.0, 30.0), sigma: 5.0, signature: DEFAULT_SIGNATURE.into(), strength },
        notes: String::new(),
    }
}

pub fn preset(name: &str) -> Result<SceneSpec> {
    let frames = 120;
    let mut strength = vec![0.0; frames];
    match name {
        "release" => {
            strength[30..=60].fill(STRONG);
        }
        "dissipated_return" => {
            strength[30..=60].fill(STRONG);
            strength[70..=110].fill(WEAK_FRACTION * STRONG);
        }
        other => return param_err(format!("unknown preset {other:?}; expected one of {PRESET_NAMES:?}")),
    }
    let mut spec = base_spec(frames, strength);
    spec.notes = format!("{name}: peak plume amplitude {STRONG}, weak phase {WEAK_FRACTION} of that");
    Ok(spec)
}

pub fn preset_scenarios() -> Vec<(&'static str, SceneSpec)> {
    PRESET_NAMES.iter().map(|&n| (n, preset(n).expect("preset names are valid"))).collect()
}
