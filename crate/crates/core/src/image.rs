//! Image and mask containers plus 8-bit PNG I/O.
//!
//! Pixels are stored interleaved (row-major, channel-last) in the normalized
//! domain `[-1, 1]`; byte value `b` maps to `b / 127.5 - 1`. Diffusion may
//! push values outside that interval. Export clamps back to `[0, 255]`.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

/// Maps an 8-bit pixel value into `[-1, 1]`.
#[inline]
pub fn byte_to_unit(b: u8) -> f64 {
    f64::from(b) / 127.5 - 1.0
}

/// Inverse of [`byte_to_unit`], clamping out-of-range values.
#[inline]
pub fn unit_to_byte(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// An `H x W x C` image in the normalized domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidTensor(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidTensor(format!(
                "data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Image with every sample set to `value`.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    /// Builds a tensor from interleaved 8-bit samples.
    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            bytes.iter().copied().map(byte_to_unit).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Samples of one pixel (length = `channels`).
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Interleaved 8-bit samples, clamped to `[0, 255]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().copied().map(unit_to_byte).collect()
    }

    /// Loads an 8-bit grayscale or RGB PNG. Alpha channels are discarded.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = decode(path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(g) => Self::from_bytes(h, w, 1, g.as_raw()),
            DynamicImage::ImageLumaA8(_) => Self::from_bytes(h, w, 1, img.to_luma8().as_raw()),
            DynamicImage::ImageRgb8(rgb) => Self::from_bytes(h, w, 3, rgb.as_raw()),
            DynamicImage::ImageRgba8(_) => Self::from_bytes(h, w, 3, img.to_rgb8().as_raw()),
            other => Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                reason: format!("expected 8-bit gray or RGB, found {:?}", other.color()),
            }),
        }
    }

    /// Writes the image as an 8-bit PNG (gray or RGB depending on channels).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (w, h) = (self.width as u32, self.height as u32);
        let bytes = self.to_bytes();
        let res = if self.channels == 1 {
            GrayImage::from_raw(w, h, bytes).map(|g| g.save(path))
        } else {
            RgbImage::from_raw(w, h, bytes).map(|g| g.save(path))
        };
        match res {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(Error::unwritable(path, e)),
            None => Err(Error::Internal("pixel buffer size mismatch".into())),
        }
    }
}

/// An `H x W` boolean region marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidTensor(format!(
                "mask length {} != {height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    /// Binarizes 8-bit samples: `>= 128` is set.
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| b >= 128).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// 0 / 255 bytes, one per pixel.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, self.to_bytes())
            .ok_or_else(|| Error::Internal("mask buffer size mismatch".into()))?;
        img.save(path).map_err(|e| Error::unwritable(path, e))
    }
}

pub(crate) fn decode(path: &Path) -> Result<DynamicImage> {
    ImageReader::open(path)
        .map_err(|e| Error::unreadable(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::unreadable(path, e))?
        .decode()
        .map_err(|e| Error::unreadable(path, e))
}
