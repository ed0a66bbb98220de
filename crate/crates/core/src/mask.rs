//! Mask file contract and synthetic mask generation.
//!
//! Masks are single-channel 8-bit PNGs with the same dimensions as their image.
//! A pixel is part of the object when its value is `>= 128`. Each record has
//! its own mask; masks are never merged across keywords.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{decode, BinaryMask};

/// One line of the mask manifest (JSONL).
///
/// `id` ties the mask to a QA record. When it is absent the entry is matched to
/// records by `image_path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskManifestEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub keyword: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_score: Option<f64>,
}

impl MaskManifestEntry {
    pub fn validate(&self) -> Result<()> {
        if self.keyword.trim().is_empty() {
            return Err(Error::EmptyField("keyword"));
        }
        match self.detector_score {
            Some(s) if !(0.0..=1.0).contains(&s) => Err(Error::InvalidConfig(format!(
                "detector_score must lie in [0, 1], got {s}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Loads and binarizes a mask, checking it against `expected_dims` (`(H, W)`).
pub fn load_mask(path: impl AsRef<Path>, expected_dims: (usize, usize)) -> Result<BinaryMask> {
    let path = path.as_ref();
    let gray = decode(path)?.to_luma8();
    let (h, w) = (gray.height() as usize, gray.width() as usize);
    if (h, w) != expected_dims {
        return Err(Error::DimsMismatch {
            path: path.to_path_buf(),
            got_h: h,
            got_w: w,
            want_h: expected_dims.0,
            want_w: expected_dims.1,
        });
    }
    BinaryMask::from_bytes(h, w, gray.as_raw())
}

/// Geometry for [`synth_mask`]. Coordinates are in pixels, rows first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum MaskShape {
    /// Axis-aligned rectangle `[top, top + height) x [left, left + width)`.
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    /// Axis-aligned ellipse with horizontal semi-axis `a` and vertical
    /// semi-axis `b`. A pixel is set when its center lies inside.
    Ellipse {
        center_row: f64,
        center_col: f64,
        a: f64,
        b: f64,
    },
}

/// Rasterizes `shape` into an `(H, W)` mask.
pub fn synth_mask(dims: (usize, usize), shape: MaskShape) -> Result<BinaryMask> {
    let (height, width) = dims;
    let oob = |detail: String| Error::GeometryOutOfBounds {
        height,
        width,
        detail,
    };
    let mut mask = BinaryMask::empty(height, width);
    match shape {
        MaskShape::Rect {
            top,
            left,
            height: rh,
            width: rw,
        } => {
            if top + rh > height || left + rw > width {
                return Err(oob(format!("rect {rh}x{rw} at ({top}, {left})")));
            }
            for r in top..top + rh {
                for c in left..left + rw {
                    mask.set(r, c, true);
                }
            }
        }
        MaskShape::Ellipse {
            center_row,
            center_col,
            a,
            b,
        } => {
            if !(a > 0.0 && b > 0.0)
                || center_col - a < 0.0
                || center_col + a > width as f64
                || center_row - b < 0.0
                || center_row + b > height as f64
            {
                return Err(oob(format!(
                    "ellipse a={a} b={b} at ({center_row}, {center_col})"
                )));
            }
            for r in 0..height {
                let dy = (r as f64 + 0.5 - center_row) / b;
                for c in 0..width {
                    let dx = (c as f64 + 0.5 - center_col) / a;
                    if dx * dx + dy * dy <= 1.0 {
                        mask.set(r, c, true);
                    }
                }
            }
        }
    }
    Ok(mask)
}
