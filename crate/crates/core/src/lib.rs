//! Compressive-sensing reconstruction of hyperspectral cubes and chemical
//! plume detection on the reconstructions.
//!
//! Cubes are sampled band-by-band with shifted Walsh-Hadamard rows and
//! reconstructed either by basis pursuit in a 1-D Haar basis or by
//! anisotropic total-variation minimization, both solved with split
//! Bregman iterations. Detection uses the adaptive coherence estimator,
//! its 3x3 bulk-coherence aggregate and a five-frame persistence filter,
//! gated by thresholds derived from background cubes.

pub mod cube;
pub mod detection;
mod error;
pub mod harness;
pub(crate) mod par;
pub mod sampling;
pub mod solver;
pub mod synth;
pub mod threshold;
pub mod wavelet;

#[cfg(feature = "cli")]
pub mod cli;

pub use cube::{CubeSequence, HyperCube};
pub use detection::{BackgroundModel, Centering, DetectionMap, Signature, Statistic};
pub use error::{Error, Result};
pub use sampling::{Measurements, Ordering, SamplingPlan};
pub use solver::{Method, ReconstructionResult, SolverParams};
pub use threshold::ThresholdSpec;
