//! Confidence-conditioned forward diffusion on masked image regions.
//!
//! A confidence label `c` selects a step count `T_c = floor(T_max * (1 - c/100))`.
//! The image is then diffused for `T_c` steps with
//! `v_t = sqrt(1 - gamma) * v_{t-1} + sqrt(gamma) * z`, `z ~ N(0, 1)` i.i.d. per
//! sample, and the noised pixels are composited back over the clean image using
//! the object mask. After `T` steps from a constant value `a` the marginal is
//! `N((1 - gamma)^(T/2) * a, 1 - (1 - gamma)^T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, ImageTensor};
use crate::rng::NoiseStream;

pub const DEFAULT_T_MAX: u32 = 1000;
pub const DEFAULT_GAMMA: f64 = 0.02;

/// Integer confidence percentage in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct ConfidenceLabel(u8);

impl ConfidenceLabel {
    pub const MAX: ConfidenceLabel = ConfidenceLabel(100);

    pub fn new(value: i64) -> Result<Self> {
        if (0..=100).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(Error::InvalidConfidence(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// The opposite label `100 - c`.
    pub fn complement(self) -> Self {
        Self(100 - self.0)
    }

    /// Renders as `"N%"`.
    pub fn render(self) -> String {
        format!("{}%", self.0)
    }
}

impl TryFrom<i64> for ConfidenceLabel {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ConfidenceLabel> for u8 {
    fn from(c: ConfidenceLabel) -> u8 {
        c.0
    }
}

impl std::fmt::Display for ConfidenceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}%", self.0)
    }
}

/// Where noise is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationMode {
    /// Noise only inside the object mask.
    #[default]
    Masked,
    /// Noise over the whole image; the mask is ignored.
    Global,
}

impl std::str::FromStr for PerturbationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "masked" => Ok(Self::Masked),
            "global" => Ok(Self::Global),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub t_max: u32,
    pub gamma: f64,
    pub seed: u64,
    pub mode: PerturbationMode,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            gamma: DEFAULT_GAMMA,
            seed: 0,
            mode: PerturbationMode::Masked,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max < 1 {
            return Err(Error::InvalidConfig("t_max must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// `floor(t_max * (1 - c/100))`, computed in integers.
pub fn confidence_to_steps(c: ConfidenceLabel, t_max: u32) -> u32 {
    (u64::from(t_max) * u64::from(100 - c.value()) / 100) as u32
}

/// One forward-diffusion step over every sample of `v`.
///
/// `step` addresses the noise draw; [`perturb`] uses steps `1..=T_c`.
pub fn diffusion_step(v: &ImageTensor, gamma: f64, noise: &NoiseStream, step: u64) -> ImageTensor {
    let (keep, sigma) = step_coefficients(gamma);
    let mut out = v.clone();
    for (j, x) in out.data_mut().iter_mut().enumerate() {
        *x = keep * *x + sigma * noise.normal(step, j as u64);
    }
    out
}

#[inline]
fn step_coefficients(gamma: f64) -> (f64, f64) {
    ((1.0 - gamma).sqrt(), gamma.sqrt())
}

/// The part of the image that receives noise.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Masked(&'a BinaryMask),
    Whole,
}

/// Perturbs `v0` for confidence `c`, drawing noise from `config.seed`.
///
/// Pixels outside the mask are copied bit-for-bit. An empty mask in masked
/// mode logs a warning and returns `v0` unchanged.
pub fn perturb(
    v0: &ImageTensor,
    mask: &BinaryMask,
    c: ConfidenceLabel,
    config: &PerturbationConfig,
) -> Result<ImageTensor> {
    config.validate()?;
    let region = match config.mode {
        PerturbationMode::Masked => Region::Masked(mask),
        PerturbationMode::Global => Region::Whole,
    };
    let steps = confidence_to_steps(c, config.t_max);
    perturb_region(
        v0,
        region,
        steps,
        config.gamma,
        &NoiseStream::new(config.seed),
    )
}

/// Runs `steps` diffusion steps inside `region` and composites over `v0`.
///
/// Each sample's chain is evaluated independently, so the result equals
/// iterating [`diffusion_step`] on the whole image and then compositing.
pub fn perturb_region(
    v0: &ImageTensor,
    region: Region<'_>,
    steps: u32,
    gamma: f64,
    noise: &NoiseStream,
) -> Result<ImageTensor> {
    if let Region::Masked(mask) = region {
        if mask.dims() != v0.dims() {
            return Err(Error::MaskShapeMismatch {
                mask_h: mask.height(),
                mask_w: mask.width(),
                image_h: v0.height(),
                image_w: v0.width(),
            });
        }
        if mask.is_empty() {
            log::warn!("empty mask: image returned unperturbed");
            return Ok(v0.clone());
        }
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let mut out = v0.clone();
    if steps == 0 {
        return Ok(out);
    }
    let (keep, sigma) = step_coefficients(gamma);
    let channels = v0.channels();
    let chain = |j: usize, x: &mut f64| {
        let selected = match region {
            Region::Masked(mask) => mask.data()[j / channels],
            Region::Whole => true,
        };
        if selected {
            let mut v = *x;
            for t in 1..=u64::from(steps) {
                v = keep * v + sigma * noise.normal(t, j as u64);
            }
            *x = v;
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.data_mut()
            .par_iter_mut()
            .enumerate()
            .with_min_len(256)
            .for_each(|(j, x)| chain(j, x));
    }
    #[cfg(not(feature = "parallel"))]
    out.data_mut()
        .iter_mut()
        .enumerate()
        .for_each(|(j, x)| chain(j, x));

    Ok(out)
}
