//! Split Bregman reconstruction of sampled cubes.
//!
//! Both solvers treat every band as an independent equality-constrained
//! problem `min R(x) s.t. S x = y`, with `R` either the l1 norm of the Haar
//! coefficients or the anisotropic periodic TV. Shifted measurements are
//! first mapped to `+-1` Walsh coefficients, so the constraint operator has
//! orthonormal rows after scaling by `1/sqrt(n)`.

mod cg;
mod l1;
pub mod ops;
mod tv;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cg::{conjugate_gradient, CgWorkspace};
pub use ops::{grad_x, grad_y, shrink, tv_norm};

use crate::cube::{write_cube, HyperCube};
use crate::error::{dim_err, param_err, Result};
use crate::par;
use crate::sampling::{shift_coefficients, walsh_coefficients, Measurements, SamplingPlan, WalshRows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    L1,
    Tv,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::L1 => "l1",
            Method::Tv => "tv",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Method::L1),
            "tv" => Ok(Method::Tv),
            other => param_err(format!("unknown method {other:?} (expected l1 or tv)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Weight on the constraint term.
    pub mu: f64,
    /// Weight on the splitting term; shrinkage uses `1 / lambda`.
    pub lambda: f64,
    /// Stop once `||S X - Y|| / ||Y||` falls below this.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Shrinkage sweeps between consecutive updates of the constraint
    /// target.
    pub inner_sweeps: usize,
    pub inner_cg_tol: f64,
    pub inner_cg_max: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 1.0,
            outer_tol: 1e-4,
            max_outer: 200,
            inner_sweeps: 10,
            inner_cg_tol: 1e-6,
            inner_cg_max: 100,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.mu, self.lambda, self.outer_tol, self.inner_cg_tol];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return param_err(format!("solver weights and tolerances must be positive: {self:?}"));
        }
        if self.max_outer == 0 || self.inner_sweeps == 0 || self.inner_cg_max == 0 {
            return param_err("iteration caps must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub cube: HyperCube,
    pub method: Method,
    /// Relative constraint residual of the whole cube after each outer
    /// iteration.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ReconstructionResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    pub fn sidecar(&self, params: &SolverParams) -> Sidecar {
        Sidecar {
            method: self.method,
            iterations: self.iterations,
            converged: self.converged,
            final_residual: self.final_residual(),
            params: *params,
        }
    }

    /// Writes `<stem>.hsc` and `<stem>.json`.
    pub fn write(&self, stem: impl AsRef<Path>, params: &SolverParams) -> Result<()> {
        let stem = stem.as_ref();
        write_cube(&self.cube, stem.with_extension("hsc"))?;
        fs::write(
            stem.with_extension("json"),
            serde_json::to_string_pretty(&self.sidecar(params))?,
        )?;
        Ok(())
    }
}

/// JSON metadata stored next to a reconstructed cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub params: SolverParams,
}

/// One band's constraint data in the normalized `+-1` frame.
pub(crate) struct BandProblem<'a> {
    pub op: &'a WalshRows,
    pub plan: &'a SamplingPlan,
    /// Normalized Walsh coefficients (`A x = g` with `A A^T = I`).
    pub g: Vec<f64>,
    /// Original measurement norm in the plan's convention.
    pub y_norm: f64,
    /// Multiplier taking the normalized solution back to data units.
    pub scale: f64,
    pub n1: usize,
    pub n2: usize,
}

impl BandProblem<'_> {
    /// `||S x - y||` in data units, given `A x_normalized - g`.
    pub fn measurement_residual(&self, diff: &[f64]) -> f64 {
        let coeff_scale = self.scale * (self.op.n() as f64).sqrt();
        let coeffs: Vec<f64> = diff.iter().map(|d| d * coeff_scale).collect();
        shift_coefficients(self.plan, &coeffs)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) struct BandOutcome {
    pub x: Vec<f64>,
    /// Absolute measurement residual after each iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Normalization for one band: RMS of the measured variation about the
/// mean, or of the mean itself for a flat band. Keeping the shrinkage
/// thresholds relative to the variation rather than the DC level makes the
/// iteration count insensitive to the band's offset.
fn band_scale(g: &[f64], dc: Option<usize>, n: usize) -> f64 {
    let energy = |skip: Option<usize>| {
        g.iter().enumerate().filter(|&(i, _)| Some(i) != skip).map(|(_, v)| v * v).sum::<f64>()
    };
    let varying = energy(dc);
    let e = if varying > 0.0 { varying } else { energy(None) };
    (e / n as f64).sqrt()
}

pub fn reconstruct(
    method: Method,
    y: &Measurements,
    plan: &SamplingPlan,
    shape: (usize, usize),
    params: &SolverParams,
) -> Result<ReconstructionResult> {
    match method {
        Method::L1 => reconstruct_l1(y, plan, shape, params),
        Method::Tv => reconstruct_tv(y, plan, shape, params),
    }
}

/// Basis pursuit in the orthonormal Haar basis of each flattened band.
pub fn reconstruct_l1(
    y: &Measurements,
    plan: &SamplingPlan,
    shape: (usize, usize),
    params: &SolverParams,
) -> Result<ReconstructionResult> {
    solve_bands(Method::L1, y, plan, shape, params)
}

/// Anisotropic periodic TV minimization of each band image.
pub fn reconstruct_tv(
    y: &Measurements,
    plan: &SamplingPlan,
    shape: (usize, usize),
    params: &SolverParams,
) -> Result<ReconstructionResult> {
    solve_bands(Method::Tv, y, plan, shape, params)
}

fn solve_bands(
    method: Method,
    y: &Measurements,
    plan: &SamplingPlan,
    (n1, n2): (usize, usize),
    params: &SolverParams,
) -> Result<ReconstructionResult> {
    params.validate()?;
    plan.validate()?;
    if n1 * n2 != plan.n {
        return dim_err(format!("{n1}x{n2} image does not match plan n = {}", plan.n));
    }
    if y.k() != plan.k {
        return dim_err(format!("measurements have k = {}, plan has k = {}", y.k(), plan.k));
    }
    let op = WalshRows::new(plan);
    let problems = (0..y.bands())
        .map(|band| {
            let coeffs = walsh_coefficients(plan, y, band)?;
            let root_n = (plan.n as f64).sqrt();
            let raw: Vec<f64> = coeffs.iter().map(|c| c / root_n).collect();
            let scale = band_scale(&raw, plan.dc_position(), plan.n);
            let g = if scale > 0.0 { raw.iter().map(|v| v / scale).collect() } else { raw };
            let y_norm = y.column(band).iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(BandProblem { op: &op, plan, g, y_norm, scale, n1, n2 })
        })
        .collect::<Result<Vec<_>>>()?;

    let outcomes = par::map_indexed(problems.len(), |band| {
        let problem = &problems[band];
        if problem.scale == 0.0 {
            return BandOutcome { x: vec![0.0; plan.n], residuals: vec![0.0], converged: true };
        }
        let mut out = match method {
            Method::L1 => l1::solve_band(problem, params),
            Method::Tv => tv::solve_band(problem, params),
        };
        for v in &mut out.x {
            *v *= problem.scale;
        }
        out
    });

    let iterations = outcomes.iter().map(|o| o.residuals.len()).max().unwrap_or(0);
    let y_total: f64 = problems.iter().map(|p| p.y_norm * p.y_norm).sum::<f64>().sqrt();
    let residual_history = (0..iterations)
        .map(|t| {
            let num: f64 = outcomes
                .iter()
                .map(|o| o.residuals[t.min(o.residuals.len() - 1)].powi(2))
                .sum::<f64>()
                .sqrt();
            if y_total > 0.0 {
                num / y_total
            } else {
                0.0
            }
        })
        .collect();
    let converged = outcomes.iter().all(|o| o.converged);
    let cube = HyperCube::from_bands(n1, n2, outcomes.into_iter().map(|o| o.x).collect())?;
    Ok(ReconstructionResult { cube, method, residual_history, iterations, converged })
}

/// Relative residual test shared by both solvers.
pub(crate) fn within_tolerance(residual: f64, y_norm: f64, tol: f64) -> bool {
    if y_norm == 0.0 {
        residual == 0.0
    } else {
        residual <= tol * y_norm
    }
}
