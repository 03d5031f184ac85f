use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Luma weights for color-to-gray conversion (R, G, B).
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Decoded raster frame with intensities in `[0, 1]`, row-major, channels
/// interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    index: usize,
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl Frame {
    pub fn new(index: usize, width: usize, height: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(Error::DimensionMismatch(format!("{channels} channels (expected 1 or 3)")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} frame",
                pixels.len()
            )));
        }
        Ok(Self {
            index,
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn from_u8(index: usize, width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let pixels = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(index, width, height, channels, pixels)
    }

    /// 8-bit samples with round-half-up quantization.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize(v)).collect()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, channel: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.channels + channel]
    }

    /// Gray intensity at an integer pixel.
    #[inline]
    pub fn gray(&self, x: usize, y: usize) -> f64 {
        let base = (y * self.width + x) * self.channels;
        if self.channels == 1 {
            self.pixels[base] as f64
        } else {
            LUMA_WEIGHTS[0] * self.pixels[base] as f64
                + LUMA_WEIGHTS[1] * self.pixels[base + 1] as f64
                + LUMA_WEIGHTS[2] * self.pixels[base + 2] as f64
        }
    }

    /// Gray intensity with replicate-border clamping for out-of-range pixels.
    #[inline]
    pub fn gray_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.gray(cx, cy)
    }
}

#[inline]
fn quantize(v: f32) -> u8 {
    libm::floor(v.clamp(0.0, 1.0) as f64 * 255.0 + 0.5) as u8
}
