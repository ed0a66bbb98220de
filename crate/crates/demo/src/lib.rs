//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain-Rust twin (`*_impl`) so the logic is testable on
//! the host without a JavaScript engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vcal_core::losses::{simpo_grad, simpo_loss, SequenceLogProb, SimPOParams};
use vcal_core::mask::{synth_mask, MaskShape};
use vcal_core::metrics::{accuracy, auc, brier, ece, roc_curve, BinStats, ScoredOutcome};
use vcal_core::perturb::{confidence_to_steps, perturb, PerturbationConfig, PerturbationMode};
use vcal_core::{ConfidenceLabel, ImageTensor};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Diffusion steps used for confidence `c` at horizon `t_max`.
#[wasm_bindgen]
pub fn steps_for(c: u8, t_max: u32) -> Result<u32, JsError> {
    let label = ConfidenceLabel::new(i64::from(c)).map_err(js_err)?;
    Ok(confidence_to_steps(label, t_max))
}

#[allow(clippy::too_many_arguments)]
pub fn perturb_rgba_impl(
    rgba: &[u8],
    width: usize,
    height: usize,
    mask_shape: &str,
    confidence: u8,
    t_max: u32,
    gamma: f64,
    seed: u64,
    global: bool,
) -> vcal_core::Result<Vec<u8>> {
    if rgba.len() != width * height * 4 {
        return Err(vcal_core::Error::InvalidTensor(format!(
            "expected {} RGBA bytes, got {}",
            width * height * 4,
            rgba.len()
        )));
    }
    let rgb: Vec<u8> = rgba
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .collect();
    let v0 = ImageTensor::from_bytes(height, width, 3, &rgb)?;
    let shape: MaskShape = serde_json::from_str(mask_shape)
        .map_err(|e| vcal_core::Error::InvalidConfig(format!("mask shape: {e}")))?;
    let mask = synth_mask((height, width), shape)?;
    let cfg = PerturbationConfig {
        t_max,
        gamma,
        seed,
        mode: if global {
            PerturbationMode::Global
        } else {
            PerturbationMode::Masked
        },
    };
    let out = perturb(
        &v0,
        &mask,
        ConfidenceLabel::new(i64::from(confidence))?,
        &cfg,
    )?;
    let bytes = out.to_bytes();
    Ok(bytes
        .chunks_exact(3)
        .zip(rgba.chunks_exact(4))
        .flat_map(|(p, src)| [p[0], p[1], p[2], src[3]])
        .collect())
}

/// Perturbs an RGBA canvas buffer inside a rectangle or ellipse.
///
/// `mask_shape` is JSON, e.g. `{"shape":"rect","top":8,"left":8,"height":40,"width":60}`
/// or `{"shape":"ellipse","center_row":32,"center_col":48,"a":30,"b":20}`.
/// Alpha passes through untouched.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn perturb_rgba(
    rgba: &[u8],
    width: usize,
    height: usize,
    mask_shape: &str,
    confidence: u8,
    t_max: u32,
    gamma: f64,
    seed: u64,
    global: bool,
) -> Result<Vec<u8>, JsError> {
    perturb_rgba_impl(
        rgba, width, height, mask_shape, confidence, t_max, gamma, seed, global,
    )
    .map_err(js_err)
}

#[derive(Debug, Serialize)]
pub struct Scenario {
    pub n: usize,
    pub accuracy: f64,
    pub brier: f64,
    pub ece: f64,
    pub auc: Option<f64>,
    pub bins: Vec<BinStats>,
    /// `[fpr, tpr]` pairs from (0, 0) to (1, 1).
    pub roc: Vec<[f64; 2]>,
}

/// Simulates a model whose stated confidence is its true accuracy pushed
/// towards 100% by `overconfidence` in [0, 1], rounded to a 10% grid.
pub fn calibration_scenario_impl(
    n: usize,
    overconfidence: f64,
    seed: u64,
    bins: usize,
) -> vcal_core::Result<Scenario> {
    if !(0.0..=1.0).contains(&overconfidence) {
        return Err(vcal_core::Error::InvalidConfig(format!(
            "overconfidence must lie in [0, 1], got {overconfidence}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes: Vec<ScoredOutcome> = (0..n)
        .map(|_| {
            let p: f64 = rng.gen();
            let correct = rng.gen::<f64>() < p;
            let stated = p + overconfidence * (1.0 - p);
            ScoredOutcome {
                confidence: (stated * 10.0).round() / 10.0,
                correct,
            }
        })
        .collect();
    let (e, stats) = ece(&outcomes, bins)?;
    let roc = roc_curve(&outcomes)
        .map(|pts| pts.iter().map(|p| [p.fpr, p.tpr]).collect())
        .unwrap_or_default();
    Ok(Scenario {
        n,
        accuracy: accuracy(&outcomes)?,
        brier: brier(&outcomes)?,
        ece: e,
        auc: auc(&outcomes).ok(),
        bins: stats,
        roc,
    })
}

/// Calibration metrics, reliability bins and ROC points as JSON.
#[wasm_bindgen]
pub fn calibration_scenario(
    n: usize,
    overconfidence: f64,
    seed: u64,
    bins: usize,
) -> Result<String, JsError> {
    let s = calibration_scenario_impl(n, overconfidence, seed, bins).map_err(js_err)?;
    serde_json::to_string(&s).map_err(js_err)
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub logprob_w: f64,
    pub loss: f64,
    pub grad_w: f64,
    pub grad_l: f64,
}

/// SimPO loss and gradient as the chosen log-probability sweeps
/// `[lo, 0)` with the rejected sequence held fixed.
pub fn simpo_curve_impl(
    beta: f64,
    lambda: f64,
    len_w: u32,
    logprob_l: f64,
    len_l: u32,
    lo: f64,
    points: usize,
) -> vcal_core::Result<Vec<CurvePoint>> {
    let params = SimPOParams::new(beta, lambda)?;
    let rejected = SequenceLogProb::new(logprob_l, len_l)?;
    if lo.is_nan() || lo >= 0.0 || points < 2 {
        return Err(vcal_core::Error::InvalidConfig(
            "need lo < 0 and at least 2 points".into(),
        ));
    }
    (0..points)
        .map(|i| {
            let x = lo * (1.0 - i as f64 / points as f64);
            let chosen = SequenceLogProb::new(x, len_w)?;
            let (grad_w, grad_l) = simpo_grad(&chosen, &rejected, &params);
            Ok(CurvePoint {
                logprob_w: x,
                loss: simpo_loss(&chosen, &rejected, &params),
                grad_w,
                grad_l,
            })
        })
        .collect()
}

#[wasm_bindgen]
pub fn simpo_curve(
    beta: f64,
    lambda: f64,
    len_w: u32,
    logprob_l: f64,
    len_l: u32,
    lo: f64,
    points: usize,
) -> Result<String, JsError> {
    let curve =
        simpo_curve_impl(beta, lambda, len_w, logprob_l, len_l, lo, points).map_err(js_err)?;
    serde_json::to_string(&curve).map_err(js_err)
}
