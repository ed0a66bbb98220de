//! Verbalized-confidence calibration tooling.
//!
//! - [`perturb`]: confidence-conditioned forward diffusion on object regions.
//! - [`mask`]: the mask file contract and synthetic masks.
//! - [`dataset`]: confidence-query dataset assembly with SFT and SimPO targets.
//! - [`losses`]: reference SFT and SimPO objectives with analytic gradients.
//! - [`metrics`]: accuracy, F1, AUC, Brier, ECE, Spearman and Kendall.
//! - [`eval`]: prediction-log scoring and report generation.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod jsonl;
pub mod losses;
pub mod mask;
pub mod metrics;
#[cfg(feature = "oracles")]
pub mod oracles;
pub mod perturb;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use image::{BinaryMask, ImageTensor};
pub use perturb::{ConfidenceLabel, PerturbationConfig, PerturbationMode};
