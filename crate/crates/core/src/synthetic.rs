//! Synthetic fixtures: deterministic images, rectangle masks and manifests,
//! for exercising the pipeline without a segmentation model.

use std::path::{Path, PathBuf};

use crate::dataset::QARecord;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::jsonl::write_jsonl;
use crate::mask::{synth_mask, MaskManifestEntry, MaskShape};

const OBJECTS: [&str; 5] = ["cup", "dog", "car", "apple", "chair"];

/// RGB test card: a smooth gradient with a solid block where the object sits.
pub fn synth_image(
    height: usize,
    width: usize,
    object: MaskShape,
    tint: [u8; 3],
) -> Result<ImageTensor> {
    let mask = synth_mask((height, width), object)?;
    let mut bytes = Vec::with_capacity(height * width * 3);
    for r in 0..height {
        for c in 0..width {
            if mask.get(r, c) {
                bytes.extend_from_slice(&tint);
            } else {
                let g = ((r * 255) / height.max(1)) as u8;
                let b = ((c * 255) / width.max(1)) as u8;
                bytes.extend_from_slice(&[96, g, b]);
            }
        }
    }
    ImageTensor::from_bytes(height, width, 3, &bytes)
}

/// Writes `n` records to `dir`: `images/`, `masks/`, `records.jsonl` and
/// `masks.jsonl`. Paths in the manifests are relative to `dir`. When
/// `without_mask` is set, that record gets no manifest entry.
pub fn write_fixture(dir: impl AsRef<Path>, n: usize, without_mask: Option<usize>) -> Result<()> {
    let dir = dir.as_ref();
    for sub in ["images", "masks"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::unwritable(&p, e))?;
    }
    let (h, w) = (48, 64);
    let mut records = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("rec-{i:02}");
        let object = OBJECTS[i % OBJECTS.len()];
        let shape = MaskShape::Rect {
            top: 6 + (i * 3) % 14,
            left: 8 + (i * 5) % 24,
            height: 16 + i % 5,
            width: 20 + (i * 2) % 9,
        };
        let tint = [
            (40 * i % 256) as u8,
            (200 - 15 * (i % 10)) as u8,
            (70 + 17 * i % 180) as u8,
        ];
        let image_path = PathBuf::from(format!("images/{id}.png"));
        let mask_path = PathBuf::from(format!("masks/{id}.png"));
        synth_image(h, w, shape, tint)?.save_png(dir.join(&image_path))?;
        synth_mask((h, w), shape)?.save_png(dir.join(&mask_path))?;
        let answer = if i % 3 == 0 { "No" } else { "Yes" };
        records.push(QARecord {
            id: id.clone(),
            image_path: image_path.clone(),
            query: format!("Is there a {object} in the image?"),
            response: answer.to_string(),
        });
        if without_mask != Some(i) {
            masks.push(MaskManifestEntry {
                id: Some(id),
                image_path,
                mask_path,
                keyword: object.to_string(),
                detector_score: Some(0.9),
            });
        }
    }
    write_jsonl(dir.join("records.jsonl"), &records)?;
    write_jsonl(dir.join("masks.jsonl"), &masks)
}
