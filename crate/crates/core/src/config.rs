//! Run configuration (TOML).
//!
//! ```toml
//! dataset_root = "data"
//! seed = 7
//! confidence_grid = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
//! ece_bins = 10
//! variants = 1
//!
//! [perturbation]
//! t_max = 1000
//! gamma = 0.02
//! mode = "masked"
//! ```
//!
//! The single `seed` drives all randomness; see [`crate::rng::derive_seed`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::ConfidenceGrid;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_ECE_BINS;
use crate::perturb::{PerturbationConfig, PerturbationMode, DEFAULT_GAMMA, DEFAULT_T_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub t_max: u32,
    pub gamma: f64,
    pub mode: PerturbationMode,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            gamma: DEFAULT_GAMMA,
            mode: PerturbationMode::Masked,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub seed: u64,
    pub confidence_grid: ConfidenceGrid,
    pub ece_bins: usize,
    pub variants: u32,
    pub perturbation: PerturbationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("."),
            seed: 0,
            confidence_grid: ConfidenceGrid::default(),
            ece_bins: DEFAULT_ECE_BINS,
            variants: 1,
            perturbation: PerturbationSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.perturbation_config().validate()?;
        if self.ece_bins == 0 {
            return Err(Error::InvalidConfig("ece_bins must be >= 1".into()));
        }
        if self.variants == 0 {
            return Err(Error::InvalidConfig("variants must be >= 1".into()));
        }
        Ok(())
    }

    pub fn perturbation_config(&self) -> PerturbationConfig {
        PerturbationConfig {
            t_max: self.perturbation.t_max,
            gamma: self.perturbation.gamma,
            seed: self.seed,
            mode: self.perturbation.mode,
        }
    }
}
