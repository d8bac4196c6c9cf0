//! Command-line front end. Each stage reads and writes the same directory
//! layout as the full pipeline, so stages can be chained by hand or pointed
//! at a `run` output directory.

use std::ffi::OsString;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cube::{frame_file_name, CubeSequence, HyperCube};
use crate::detection::{Centering, Statistic};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, MeasurementManifest};
use crate::sampling::{OrderingKind, SamplingPlan};
use crate::solver::Method;
use crate::synth;
use crate::threshold::ThresholdSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hypercs", version, about = "Compressive hyperspectral reconstruction and plume detection")]
pub struct Cli {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Seed for scene generation and random sampling plans.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene: cube frames, scene.json and signature.csv.
    Gen(GenArgs),
    /// Build a sampling plan and measure every frame.
    Sample(SampleArgs),
    /// Reconstruct frames from a measurement directory.
    Reconstruct(ReconstructArgs),
    /// Compute ACE and bulk-coherence maps for a cube sequence.
    Detect(DetectArgs),
    /// Calibrate ACE and bulk thresholds from background maps.
    Threshold(ThresholdArgs),
    /// Count pixels over T for raw versus reconstructed maps.
    Compare(CompareArgs),
    /// Like `compare`, over the full threshold sweep.
    Sweep(CompareArgs),
    /// Run the full experiment and write the report.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Bundled scenario name (`release`, `dissipated_return`).
    #[arg(long, conflicts_with = "scene")]
    preset: Option<String>,
    /// Scene spec JSON.
    #[arg(long, value_name = "JSON")]
    scene: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    source: SourceArgs,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Cube sequence directory.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    #[arg(long)]
    compression: Option<f64>,
    #[arg(long, value_parser = parse_ordering)]
    ordering: Option<OrderingKind>,
    /// Training frames `START:END` for max-variance ordering.
    #[arg(long, value_parser = parse_range, value_name = "START:END")]
    background: Option<(usize, usize)>,
    /// Reuse an existing plan instead of building one.
    #[arg(long, value_name = "JSON")]
    plan: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    inner_sweeps: Option<usize>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max: Option<usize>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Directory holding `plan.json` and `measurements/`.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Cube sequence directory.
    #[arg(long, value_name = "DIR")]
    input: PathBuf,
    /// Signature CSV or bundled signature name.
    #[arg(long)]
    signature: Option<String>,
    /// Background frames `START:END` for the covariance estimate.
    #[arg(long, value_parser = parse_range, value_name = "START:END")]
    background: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_centering)]
    centering: Option<Centering>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Map directory written by `detect`.
    #[arg(long, value_name = "DIR")]
    maps: PathBuf,
    #[arg(long, value_parser = parse_range, value_name = "START:END")]
    background: Option<(usize, usize)>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Explicit beta; defaults to the raw or reconstructed convention.
    #[arg(long)]
    beta: Option<f64>,
    /// The maps come from reconstructed cubes.
    #[arg(long)]
    reconstructed: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Raw-data map directory with threshold files.
    #[arg(long, value_name = "DIR")]
    raw: PathBuf,
    /// Reconstructed-data map directory with threshold files.
    #[arg(long, value_name = "DIR")]
    recon: PathBuf,
    /// Method label for the reconstructed maps.
    #[arg(long, value_parser = parse_method, default_value = "tv")]
    method: Method,
    #[arg(long = "statistic", value_parser = parse_statistic)]
    statistics: Vec<Statistic>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    compression: Option<f64>,
    #[arg(long = "method", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected START:END, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    Ok((a, b))
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_statistic(s: &str) -> std::result::Result<Statistic, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_json_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_ordering(s: &str) -> std::result::Result<OrderingKind, String> {
    parse_json_enum(s)
}

fn parse_centering(s: &str) -> std::result::Result<Centering, String> {
    parse_json_enum(s)
}

impl SolverArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        let p = &mut config.solver;
        p.mu = self.mu.unwrap_or(p.mu);
        p.lambda = self.lambda.unwrap_or(p.lambda);
        p.outer_tol = self.tol.unwrap_or(p.outer_tol);
        p.max_outer = self.max_outer.unwrap_or(p.max_outer);
        p.inner_sweeps = self.inner_sweeps.unwrap_or(p.inner_sweeps);
        p.inner_cg_tol = self.cg_tol.unwrap_or(p.inner_cg_tol);
        p.inner_cg_max = self.cg_max.unwrap_or(p.inner_cg_max);
    }
}

impl SourceArgs {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if self.preset.is_some() || self.scene.is_some() {
            config.preset = self.preset.clone();
            config.scene = self.scene.as_ref().map(synth::SceneSpec::read).transpose()?;
            config.input = None;
        }
        Ok(())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_INTERNAL
            }
        }
        Err(_) => EXIT_INTERNAL,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::read(path).map_err(|e| e.context(path.display().to_string()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    match cli.command {
        Command::Gen(a) => gen(config, &a),
        Command::Sample(a) => sample(config, &a),
        Command::Reconstruct(a) => reconstruct(config, &a),
        Command::Detect(a) => detect(config, &a),
        Command::Threshold(a) => threshold(config, &a, cli.out.is_some()),
        Command::Compare(a) => compare(config, &a, false),
        Command::Sweep(a) => compare(config, &a, true),
        Command::Run(a) => run_all(config, &a),
    }
}

fn gen(mut config: ExperimentConfig, a: &GenArgs) -> Result<()> {
    a.source.apply(&mut config)?;
    if config.preset.is_none() && config.scene.is_none() {
        return Err(Error::InvalidParameter("gen needs --preset, --scene or a config naming one".into()));
    }
    config.input = None;
    let scene = harness::load_scene(&config)?;
    let out = &config.output;
    scene.frames.write_dir(out)?;
    if let Some(spec) = &scene.spec {
        spec.write(out.join("scene.json"))?;
    }
    scene.signature.write(out.join("signature.csv"))?;
    println!("wrote {} frames to {}", scene.frames.len(), out.display());
    Ok(())
}

fn read_frames(input: &Path) -> Result<CubeSequence> {
    let frames = CubeSequence::read_dir(input)?;
    if frames.is_empty() {
        return Err(Error::InvalidParameter(format!("{} holds no frames", input.display())));
    }
    Ok(frames)
}

fn sample(mut config: ExperimentConfig, a: &SampleArgs) -> Result<()> {
    config.compression = a.compression.unwrap_or(config.compression);
    config.ordering = a.ordering.unwrap_or(config.ordering);
    config.background_frames = a.background.unwrap_or(config.background_frames);
    let frames = read_frames(&a.input)?;
    let shape = frames.shape().expect("nonempty");
    let plan = match &a.plan {
        Some(path) => SamplingPlan::read(path)?,
        None => harness::train_plan(&config, &frames, harness::plan_seed(&config)?)?,
    };
    write_measurements(&config.output, &plan, frames.frames(), shape)
}

fn write_measurements(
    out: &Path,
    plan: &SamplingPlan,
    frames: &[HyperCube],
    (n1, n2, bands): (usize, usize, usize),
) -> Result<()> {
    let ys = harness::sample_sequence(plan, frames)?;
    fs::create_dir_all(out.join("measurements"))?;
    plan.write(out.join("plan.json"))?;
    let manifest = MeasurementManifest { frames: ys.len(), n1, n2, bands };
    fs::write(out.join(harness::MEASUREMENT_MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    for (t, y) in ys.iter().enumerate() {
        y.write(out.join(harness::measurement_file(t)))?;
    }
    println!("sampled {} frames with k = {} of n = {}", ys.len(), plan.k, plan.n);
    Ok(())
}

fn reconstruct(mut config: ExperimentConfig, a: &ReconstructArgs) -> Result<()> {
    a.solver.apply(&mut config);
    config.solver.validate()?;
    let (plan, manifest, ys) = harness::read_measurements(&a.input)?;
    let results = crate::par::with_workers(config.workers, || {
        harness::reconstruct_sequence(a.method, &plan, &ys, (manifest.n1, manifest.n2), &config.solver)
    })?;
    let out = &config.output;
    let mut converged = 0;
    let mut frames = Vec::with_capacity(results.len());
    fs::create_dir_all(out)?;
    for (t, r) in results.into_iter().enumerate() {
        let sidecar = out.join(frame_file_name(t)).with_extension("json");
        fs::write(sidecar, serde_json::to_string_pretty(&r.sidecar(&config.solver))?)?;
        converged += usize::from(r.converged);
        frames.push(r.cube);
    }
    let seq = CubeSequence::new(frames)?;
    seq.write_dir(out)?;
    println!("reconstructed {} frames with {}; {converged} converged", seq.len(), a.method);
    Ok(())
}

fn detect(mut config: ExperimentConfig, a: &DetectArgs) -> Result<()> {
    config.background_frames = a.background.unwrap_or(config.background_frames);
    config.centering = a.centering.unwrap_or(config.centering);
    let frames = read_frames(&a.input)?;
    let sig_name = a
        .signature
        .clone()
        .or_else(|| config.signature.clone())
        .or_else(|| a.input.join("signature.csv").is_file().then(|| a.input.join("signature.csv").display().to_string()))
        .ok_or_else(|| Error::InvalidParameter("detect needs --signature".into()))?;
    let sig = harness::resolve_signature(&sig_name)?;
    let set = crate::par::with_workers(config.workers, || {
        harness::DetectionSet::compute(frames.frames(), &sig, config.background_frames, config.centering)
    })?;
    let out = &config.output;
    fs::create_dir_all(out)?;
    for t in 0..set.ace.len() {
        set.ace[t].write(out.join(harness::map_stem(Statistic::Ace, t)))?;
        set.bulk[t].write(out.join(harness::map_stem(Statistic::Bulk, t)))?;
    }
    println!("scored {} frames against {}", set.ace.len(), sig.name);
    Ok(())
}

/// Writes next to the maps unless `--out` was given.
fn threshold(mut config: ExperimentConfig, a: &ThresholdArgs, explicit_out: bool) -> Result<()> {
    config.background_frames = a.background.unwrap_or(config.background_frames);
    config.alpha = a.alpha.unwrap_or(config.alpha);
    let beta = a.beta.unwrap_or(if a.reconstructed { config.beta_recon } else { config.beta_raw });
    let out = if explicit_out { config.output.clone() } else { a.maps.clone() };
    fs::create_dir_all(&out)?;
    for statistic in [Statistic::Ace, Statistic::Bulk] {
        let maps = harness::read_map_series(&a.maps, statistic)?;
        let spec: ThresholdSpec = harness::background_threshold(&maps, config.background_frames, config.alpha, beta)?;
        spec.write(out.join(harness::threshold_file(statistic)))?;
        println!("{statistic}: T = {:e}", spec.t);
    }
    Ok(())
}

fn compare(config: ExperimentConfig, a: &CompareArgs, sweep: bool) -> Result<()> {
    let statistics = if a.statistics.is_empty() { config.statistics.clone() } else { a.statistics.clone() };
    let mut report = harness::report_from_maps(&a.raw, &a.recon, a.method, &statistics)?;
    if !sweep {
        report.rows.retain(|r| r.multiplier == 1.0);
    }
    report.emit(&config.output)?;
    println!("wrote {} rows to {}", report.rows.len(), config.output.join("report.csv").display());
    Ok(())
}

fn run_all(mut config: ExperimentConfig, a: &RunArgs) -> Result<()> {
    a.source.apply(&mut config)?;
    a.solver.apply(&mut config);
    config.compression = a.compression.unwrap_or(config.compression);
    if !a.methods.is_empty() {
        config.methods = a.methods.clone();
    }
    config.workers = a.workers.or(config.workers);
    let report = harness::run_pipeline(&config)?;
    for c in &report.metadata.convergence {
        println!("{}: {}/{} frames converged", c.method, c.converged_frames, c.frames);
    }
    println!("wrote {} rows to {}", report.rows.len(), config.output.join("report.csv").display());
    Ok(())
}
