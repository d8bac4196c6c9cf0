//! End-to-end experiment: sample every frame, reconstruct it with each
//! method, score raw and reconstructed cubes, calibrate thresholds on the
//! background frames of each source and tabulate pixels-over-threshold.
//!
//! Every intermediate product is written below the configured output
//! directory and listed with its SHA-256 in `artifacts.json`.

mod config;
mod report;

pub use config::{ExperimentConfig, Fov};
pub use report::{
    render_svg, ComparisonReport, ConvergenceSummary, ReportMetadata, ReportRow, ThresholdRecord, CSV_HEADER,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cube::{frame_file_name, CubeSequence, HyperCube};
use crate::detection::{ace_map, bulk_coherence, persistence_filter, BackgroundModel, DetectionMap, Signature, Statistic};
use crate::error::{dim_err, param_err, Error, Result};
use crate::par;
use crate::sampling::{build_plan, sample_cube, Measurements, Ordering, OrderingKind, SamplingPlan};
use crate::solver::{reconstruct, Method, ReconstructionResult, SolverParams};
use crate::synth::{self, SceneSpec};
use crate::threshold::{compute_threshold, count_over, ThresholdSpec, SWEEP_MULTIPLIERS};

/// Loaded input data.
#[derive(Debug, Clone)]
pub struct Scene {
    pub frames: CubeSequence,
    pub signature: Signature,
    /// Generator spec when the data is synthetic.
    pub spec: Option<SceneSpec>,
    pub seed: u64,
}

/// Bundled signature name or path to a signature CSV.
pub fn resolve_signature(name_or_path: &str) -> Result<Signature> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        Signature::read(path)
    } else {
        synth::preset_signature(name_or_path)
    }
}

pub fn scene_spec(config: &ExperimentConfig) -> Result<Option<SceneSpec>> {
    let mut spec = match (&config.preset, &config.scene) {
        (Some(name), _) => synth::preset(name)?,
        (None, Some(spec)) => spec.clone(),
        (None, None) => return Ok(None),
    };
    if let Some(seed) = config.seed {
        spec.seed = seed;
    }
    Ok(Some(spec))
}

pub fn load_scene(config: &ExperimentConfig) -> Result<Scene> {
    config.validate()?;
    let spec = scene_spec(config)?;
    let (frames, signature, seed) = match &spec {
        Some(spec) => {
            let plume_sig = resolve_signature(&spec.plume.signature)?;
            let frames = synth::generate(spec, &plume_sig)?;
            let signature = match &config.signature {
                Some(s) => resolve_signature(s)?,
                None => plume_sig,
            };
            (frames, signature, spec.seed)
        }
        None => {
            let dir = config.input.as_ref().expect("validated source");
            let frames = CubeSequence::read_dir(dir)?;
            let Some(sig) = &config.signature else {
                return param_err("`signature` is required with `input` data");
            };
            (frames, resolve_signature(sig)?, plan_seed(config)?)
        }
    };
    let frames = match config.fov {
        Some(fov) => CubeSequence::new(
            frames.frames().iter().map(|f| f.crop_fov(fov.origin, fov.size)).collect::<Result<_>>()?,
        )?,
        None => frames,
    };
    let Some((_, _, b)) = frames.shape() else {
        return param_err("scene has no frames");
    };
    if b != signature.bands() {
        return Err(Error::Dimension(format!("scene has {b} bands, signature {} has {}", signature.name, signature.bands())));
    }
    let (start, end) = config.background_frames;
    if end > frames.len() {
        return param_err(format!("background frames [{start}, {end}) exceed the {} available", frames.len()));
    }
    if let Some(spec) = &spec {
        if let Some(t) = spec.active_frames().into_iter().find(|t| (start..end).contains(t)) {
            return param_err(format!("background range [{start}, {end}) includes plume frame {t}"));
        }
    }
    Ok(Scene { frames, signature, spec, seed })
}

/// Seed for sampling plans: the scene seed for synthetic data, else
/// `config.seed`, else 0.
pub fn plan_seed(config: &ExperimentConfig) -> Result<u64> {
    Ok(scene_spec(config)?.map(|s| s.seed).or(config.seed).unwrap_or(0))
}

/// Plan over the frames' pixel count, trained on the background frames
/// when the ordering needs training data.
pub fn train_plan(config: &ExperimentConfig, frames: &CubeSequence, seed: u64) -> Result<SamplingPlan> {
    let Some((n1, n2, _)) = frames.shape() else {
        return param_err("no frames to sample");
    };
    let (start, end) = config.background_frames;
    if start >= end || end > frames.len() {
        return param_err(format!("training frames [{start}, {end}) not within {} frames", frames.len()));
    }
    let training = CubeSequence::new(frames.frames()[start..end].to_vec())?;
    let ordering = match config.ordering {
        OrderingKind::MaxVariance => Ordering::MaxVariance(&training),
        OrderingKind::Sequency => Ordering::Sequency,
        OrderingKind::Random => Ordering::Random,
    };
    build_plan(n1 * n2, config.compression, ordering, seed)
}

pub fn sample_sequence(plan: &SamplingPlan, frames: &[HyperCube]) -> Result<Vec<Measurements>> {
    par::map_indexed(frames.len(), |t| sample_cube(plan, &frames[t]).map_err(|e| e.context(format!("frame {t}"))))
        .into_iter()
        .collect()
}

/// Frame-parallel reconstruction; results are in frame order.
pub fn reconstruct_sequence(
    method: Method,
    plan: &SamplingPlan,
    measurements: &[Measurements],
    shape: (usize, usize),
    params: &SolverParams,
) -> Result<Vec<ReconstructionResult>> {
    par::map_indexed(measurements.len(), |t| {
        reconstruct(method, &measurements[t], plan, shape, params).map_err(|e| e.context(format!("frame {t}, method {method}")))
    })
    .into_iter()
    .collect()
}

/// ACE and bulk-coherence maps of one source, with the background model
/// they were scored against.
#[derive(Debug, Clone)]
pub struct DetectionSet {
    pub background: BackgroundModel,
    pub ace: Vec<DetectionMap>,
    pub bulk: Vec<DetectionMap>,
}

impl DetectionSet {
    pub fn compute(
        frames: &[HyperCube],
        sig: &Signature,
        background_frames: (usize, usize),
        centering: crate::detection::Centering,
    ) -> Result<Self> {
        let (start, end) = background_frames;
        if start >= end || end > frames.len() {
            return param_err(format!("background frames [{start}, {end}) not within {} frames", frames.len()));
        }
        let background = BackgroundModel::from_cubes(&frames[start..end])?.with_centering(centering);
        let ace = frames
            .iter()
            .enumerate()
            .map(|(t, f)| ace_map(f, sig, &background, t).map_err(|e| e.context(format!("frame {t}"))))
            .collect::<Result<Vec<_>>>()?;
        let bulk = ace.iter().map(bulk_coherence).collect();
        Ok(Self { background, ace, bulk })
    }

    /// Maps that calibrate `statistic`; persistence reuses the bulk maps.
    pub fn family(&self, statistic: Statistic) -> &[DetectionMap] {
        match statistic {
            Statistic::Ace => &self.ace,
            Statistic::Bulk | Statistic::BulkPersist => &self.bulk,
        }
    }

    pub fn threshold(&self, statistic: Statistic, range: (usize, usize), alpha: f64, beta: f64) -> Result<ThresholdSpec> {
        background_threshold(self.family(statistic), range, alpha, beta)
    }

    pub fn sweep_counts(&self, statistic: Statistic, spec: &ThresholdSpec) -> Result<Vec<Vec<usize>>> {
        sweep_counts(self.family(statistic), statistic, spec)
    }
}

/// `counts[t][i]`: pixels of frame `t` above `spec.sweep[i]`. `maps` are
/// ACE or bulk maps; for `bulk_persist` the persistence filter is rerun on
/// the bulk maps at each sweep value.
pub fn sweep_counts(maps: &[DetectionMap], statistic: Statistic, spec: &ThresholdSpec) -> Result<Vec<Vec<usize>>> {
    let mut counts = vec![vec![0; spec.sweep.len()]; maps.len()];
    for (i, &t) in spec.sweep.iter().enumerate() {
        let persisted;
        let scored = if statistic == Statistic::BulkPersist {
            persisted = persistence_filter(maps, t)?;
            &persisted
        } else {
            maps
        };
        for (row, map) in counts.iter_mut().zip(scored) {
            row[i] = count_over(map, t);
        }
    }
    Ok(counts)
}

/// Threshold from the maps of frames `[start, end)`.
pub fn background_threshold(maps: &[DetectionMap], (start, end): (usize, usize), alpha: f64, beta: f64) -> Result<ThresholdSpec> {
    if end > maps.len() || start >= end {
        return param_err(format!("background frames [{start}, {end}) not within {} maps", maps.len()));
    }
    let sets: Vec<(String, &[f64])> =
        maps[start..end].iter().map(|m| (format!("frame_{:04}", m.frame), m.values.as_slice())).collect();
    compute_threshold(&sets, alpha, beta)
}

/// Shape of a directory of per-frame measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementManifest {
    pub frames: usize,
    pub n1: usize,
    pub n2: usize,
    pub bands: usize,
}

pub fn measurement_file(t: usize) -> String {
    format!("measurements/frame_{t:04}.hsm")
}

pub const MEASUREMENT_MANIFEST: &str = "measurements/manifest.json";

/// Reads `plan.json` and the `measurements/` directory under `dir`.
pub fn read_measurements(dir: impl AsRef<Path>) -> Result<(SamplingPlan, MeasurementManifest, Vec<Measurements>)> {
    let dir = dir.as_ref();
    let plan = SamplingPlan::read(dir.join("plan.json")).map_err(|e| e.context(dir.join("plan.json").display().to_string()))?;
    let manifest_path = dir.join(MEASUREMENT_MANIFEST);
    let manifest: MeasurementManifest = serde_json::from_str(
        &fs::read_to_string(&manifest_path).map_err(|e| Error::from(e).context(manifest_path.display().to_string()))?,
    )?;
    if manifest.n1 * manifest.n2 != plan.n {
        return Err(Error::Format(format!(
            "measurement shape {}x{} does not match plan size {}",
            manifest.n1, manifest.n2, plan.n
        )));
    }
    let ys = (0..manifest.frames).map(|t| Measurements::read(dir.join(measurement_file(t)))).collect::<Result<Vec<_>>>()?;
    Ok((plan, manifest, ys))
}

pub fn map_stem(statistic: Statistic, t: usize) -> String {
    format!("{statistic}_{t:04}")
}

pub fn threshold_file(statistic: Statistic) -> String {
    let family = if statistic == Statistic::Ace { Statistic::Ace } else { Statistic::Bulk };
    format!("threshold_{family}.json")
}

/// Reads `<statistic>_0000`, `<statistic>_0001`, ... until the first gap.
pub fn read_map_series(dir: impl AsRef<Path>, statistic: Statistic) -> Result<Vec<DetectionMap>> {
    let dir = dir.as_ref();
    let mut maps = Vec::new();
    while dir.join(map_stem(statistic, maps.len())).with_extension("csv").is_file() {
        let stem = dir.join(map_stem(statistic, maps.len()));
        maps.push(DetectionMap::read(&stem).map_err(|e| e.context(stem.display().to_string()))?);
    }
    if maps.is_empty() {
        return param_err(format!("no {statistic} maps in {}", dir.display()));
    }
    Ok(maps)
}

/// Writes files under a root and records their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::from(e).context(root.display().to_string()))?;
        Ok(Self { root, entries: Vec::new() })
    }

    /// Writes `bytes` to `root/rel` and returns their hash.
    pub fn put(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<String> {
        let bytes = bytes.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let sha256 = sha256_hex(bytes);
        self.entries.push(ArtifactEntry { path: rel.to_string(), sha256: sha256.clone() });
        Ok(sha256)
    }

    pub fn put_map(&mut self, stem: &str, map: &DetectionMap) -> Result<()> {
        self.put(&format!("{stem}.csv"), map.to_csv_string()?)?;
        self.put(&format!("{stem}.json"), serde_json::to_string_pretty(&map.sidecar())?)?;
        Ok(())
    }

    /// Writes `artifacts.json` and returns the entries.
    pub fn finish(mut self) -> Result<Vec<ArtifactEntry>> {
        let manifest = serde_json::to_string_pretty(&self.entries)?;
        fs::write(self.root.join("artifacts.json"), manifest)?;
        Ok(std::mem::take(&mut self.entries))
    }
}

fn write_maps(out: &mut ArtifactWriter, source: &str, set: &DetectionSet, bulk_t: f64) -> Result<()> {
    let persisted = persistence_filter(&set.bulk, bulk_t)?;
    for t in 0..set.ace.len() {
        for (statistic, map) in [(Statistic::Ace, &set.ace[t]), (Statistic::Bulk, &set.bulk[t]), (Statistic::BulkPersist, &persisted[t])] {
            out.put_map(&format!("maps/{source}/{}", map_stem(statistic, t)), map)?;
        }
    }
    Ok(())
}

struct SourceThresholds {
    ace: ThresholdSpec,
    bulk: ThresholdSpec,
}

impl SourceThresholds {
    fn compute(set: &DetectionSet, config: &ExperimentConfig, beta: f64) -> Result<Self> {
        Ok(Self {
            ace: set.threshold(Statistic::Ace, config.background_frames, config.alpha, beta)?,
            bulk: set.threshold(Statistic::Bulk, config.background_frames, config.alpha, beta)?,
        })
    }

    fn get(&self, statistic: Statistic) -> &ThresholdSpec {
        match statistic {
            Statistic::Ace => &self.ace,
            Statistic::Bulk | Statistic::BulkPersist => &self.bulk,
        }
    }

    fn records(&self, source: &str) -> [ThresholdRecord; 2] {
        [
            ThresholdRecord { source: source.to_string(), statistic: Statistic::Ace, spec: self.ace.clone() },
            ThresholdRecord { source: source.to_string(), statistic: Statistic::Bulk, spec: self.bulk.clone() },
        ]
    }

    fn write(&self, out: &mut ArtifactWriter, source: &str) -> Result<()> {
        out.put(&format!("maps/{source}/{}", threshold_file(Statistic::Ace)), self.ace.to_json()?)?;
        out.put(&format!("maps/{source}/{}", threshold_file(Statistic::Bulk)), self.bulk.to_json()?)?;
        Ok(())
    }
}

fn convergence(method: Method, results: &[ReconstructionResult]) -> ConvergenceSummary {
    ConvergenceSummary {
        method,
        frames: results.len(),
        converged_frames: results.iter().filter(|r| r.converged).count(),
        max_iterations: results.iter().map(|r| r.iterations).max().unwrap_or(0),
        max_final_residual: results.iter().map(|r| r.final_residual()).fold(0.0, f64::max),
    }
}

/// Runs the full experiment, writing every artifact and the report under
/// `config.output`. Parallelism follows `HYPERCS_WORKERS`, then
/// `config.workers`.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<ComparisonReport> {
    par::with_workers(config.workers, || run_inner(config))
}

fn run_inner(config: &ExperimentConfig) -> Result<ComparisonReport> {
    let scene = load_scene(config)?;
    let (n1, n2, _) = scene.frames.shape().expect("scene has frames");
    let frames = scene.frames.frames();
    let mut out = ArtifactWriter::new(&config.output)?;
    let config_sha256 = config.hash()?;
    out.put("config.json", config.to_json()?)?;
    if let Some(spec) = &scene.spec {
        out.put("scene.json", spec.to_json()?)?;
    }
    out.put("signature.csv", scene.signature.to_csv_string())?;

    let plan = train_plan(config, &scene.frames, scene.seed)?;
    let plan_sha256 = out.put("plan.json", plan.to_json()?)?;
    let measurements = sample_sequence(&plan, frames)?;
    let (_, _, bands) = scene.frames.shape().expect("scene has frames");
    let manifest = MeasurementManifest { frames: frames.len(), n1, n2, bands };
    out.put(MEASUREMENT_MANIFEST, serde_json::to_string_pretty(&manifest)?)?;
    for (t, y) in measurements.iter().enumerate() {
        out.put(&measurement_file(t), y.to_bytes())?;
    }

    let raw = DetectionSet::compute(frames, &scene.signature, config.background_frames, config.centering)
        .map_err(|e| e.context("raw data"))?;
    let raw_thr = SourceThresholds::compute(&raw, config, config.beta_raw)?;
    raw_thr.write(&mut out, "raw")?;
    write_maps(&mut out, "raw", &raw, raw_thr.bulk.t)?;

    let mut statistics = config.statistics.clone();
    statistics.sort();
    statistics.dedup();
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();

    let raw_counts =
        statistics.iter().map(|&s| raw.sweep_counts(s, raw_thr.get(s))).collect::<Result<Vec<_>>>()?;
    let mut thresholds = raw_thr.records("raw").to_vec();
    let mut convergence_summary = Vec::new();
    let mut recon_counts = Vec::new();
    let mut recon_thr = Vec::new();
    for &method in &methods {
        let results = reconstruct_sequence(method, &plan, &measurements, (n1, n2), &config.solver)?;
        for (t, r) in results.iter().enumerate() {
            let stem = format!("recon/{method}/{}", frame_file_name(t));
            out.put(&stem, r.cube.to_bytes()?)?;
            out.put(&stem.replace(".hsc", ".json"), serde_json::to_string_pretty(&r.sidecar(&config.solver))?)?;
        }
        convergence_summary.push(convergence(method, &results));
        let cubes: Vec<HyperCube> = results.into_iter().map(|r| r.cube).collect();
        let set = DetectionSet::compute(&cubes, &scene.signature, config.background_frames, config.centering)
            .map_err(|e| e.context(format!("method {method}")))?;
        let thr = SourceThresholds::compute(&set, config, config.beta_recon)?;
        let source = method.to_string();
        thr.write(&mut out, &source)?;
        write_maps(&mut out, &source, &set, thr.bulk.t)?;
        thresholds.extend(thr.records(&source));
        recon_counts.push(statistics.iter().map(|&s| set.sweep_counts(s, thr.get(s))).collect::<Result<Vec<_>>>()?);
        recon_thr.push(thr);
    }

    let mut rows = Vec::with_capacity(frames.len() * methods.len() * statistics.len() * SWEEP_MULTIPLIERS.len());
    for t in 0..frames.len() {
        for (mi, &method) in methods.iter().enumerate() {
            for (si, &statistic) in statistics.iter().enumerate() {
                let spec = recon_thr[mi].get(statistic);
                for (i, &multiplier) in SWEEP_MULTIPLIERS.iter().enumerate() {
                    rows.push(ReportRow {
                        frame: t,
                        method,
                        statistic,
                        multiplier,
                        threshold: spec.sweep[i],
                        count_raw: raw_counts[si][t][i],
                        count_recon: recon_counts[mi][si][t][i],
                    });
                }
            }
        }
    }
    let report = ComparisonReport {
        rows,
        metadata: ReportMetadata {
            plan_sha256,
            config_sha256,
            frames: frames.len(),
            background_frames: Some(config.background_frames),
            beta_raw: config.beta_raw,
            beta_recon: config.beta_recon,
            thresholds,
            convergence: convergence_summary,
        },
    };
    for (rel, text) in report.files()? {
        out.put(&rel, text)?;
    }
    out.finish()?;
    Ok(report)
}

/// Rebuilds the report grid from two persisted map directories, each
/// holding `ace_*`/`bulk_*` maps and `threshold_*.json` files.
pub fn report_from_maps(raw: &Path, recon: &Path, method: Method, statistics: &[Statistic]) -> Result<ComparisonReport> {
    let mut statistics = statistics.to_vec();
    statistics.sort();
    statistics.dedup();
    let mut thresholds = Vec::new();
    let mut counts = Vec::new();
    let mut frames = None;
    for (source, dir) in [("raw", raw), (method.as_str(), recon)] {
        let mut per_stat = Vec::new();
        for &statistic in &statistics {
            let family = if statistic == Statistic::Ace { Statistic::Ace } else { Statistic::Bulk };
            let path = dir.join(threshold_file(statistic));
            let spec = ThresholdSpec::read(&path).map_err(|e| e.context(path.display().to_string()))?;
            let maps = read_map_series(dir, family)?;
            if *frames.get_or_insert(maps.len()) != maps.len() {
                return dim_err(format!("{} holds {} frames, expected {}", dir.display(), maps.len(), frames.unwrap_or(0)));
            }
            per_stat.push((spec.clone(), sweep_counts(&maps, statistic, &spec)?));
            if !thresholds.iter().any(|r: &ThresholdRecord| r.source == source && r.statistic == family) {
                thresholds.push(ThresholdRecord { source: source.to_string(), statistic: family, spec });
            }
        }
        counts.push(per_stat);
    }
    let frames = frames.unwrap_or(0);
    let mut rows = Vec::new();
    for t in 0..frames {
        for (si, &statistic) in statistics.iter().enumerate() {
            let (spec, recon_counts) = &counts[1][si];
            for (i, &multiplier) in SWEEP_MULTIPLIERS.iter().enumerate() {
                rows.push(ReportRow {
                    frame: t,
                    method,
                    statistic,
                    multiplier,
                    threshold: spec.sweep[i],
                    count_raw: counts[0][si].1[t][i],
                    count_recon: recon_counts[t][i],
                });
            }
        }
    }
    let beta = |source: &str| thresholds.iter().find(|r| r.source == source).map_or(0.0, |r| r.spec.beta);
    let metadata = ReportMetadata {
        plan_sha256: String::new(),
        config_sha256: String::new(),
        frames,
        background_frames: None,
        beta_raw: beta("raw"),
        beta_recon: beta(method.as_str()),
        thresholds,
        convergence: Vec::new(),
    };
    Ok(ComparisonReport { rows, metadata })
}
