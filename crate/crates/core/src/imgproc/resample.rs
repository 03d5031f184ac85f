use alloc::vec::Vec;

use super::frame::Frame;
use crate::{Error, Result};

/// Cubic convolution kernel parameter (Keys / Catmull-Rom).
pub const BICUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel.
pub fn cubic_kernel(t: f64) -> f64 {
    let a = BICUBIC_A;
    let t = libm::fabs(t);
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps for a continuous sample coordinate: the four neighbouring
/// indices (unclamped) and their kernel weights.
pub fn cubic_weights(coord: f64) -> (isize, [f64; 4]) {
    let base = libm::floor(coord);
    let frac = coord - base;
    (
        base as isize - 1,
        [
            cubic_kernel(frac + 1.0),
            cubic_kernel(frac),
            cubic_kernel(1.0 - frac),
            cubic_kernel(2.0 - frac),
        ],
    )
}

struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn axis_taps(out_len: usize, in_len: usize, scale: f64) -> Vec<Taps> {
    (0..out_len)
        .map(|k| {
            let src = (k as f64 + 0.5) / scale - 0.5;
            let (first, weight) = cubic_weights(src);
            let mut index = [0usize; 4];
            for (i, slot) in index.iter_mut().enumerate() {
                *slot = (first + i as isize).clamp(0, in_len as isize - 1) as usize;
            }
            Taps { index, weight }
        })
        .collect()
}

/// Bicubic resampling with pixel-center alignment and replicate borders.
///
/// Output sample `k` reads input coordinate `(k + 0.5) / scale - 0.5` on each
/// axis; channels are resampled independently and clamped to `[0, 1]`.
pub fn bicubic_resample(frame: &Frame, out_width: usize, out_height: usize) -> Result<Frame> {
    let sx = out_width as f64 / frame.width() as f64;
    let sy = out_height as f64 / frame.height() as f64;
    bicubic_resample_scaled(frame, out_width, out_height, (sx, sy))
}

/// Like [`bicubic_resample`] with an explicit `(x, y)` output-to-input scale,
/// for outputs that cover only part of the input (integer downsampling of
/// sides that are not multiples of the factor).
pub fn bicubic_resample_scaled(frame: &Frame, out_width: usize, out_height: usize, scale: (f64, f64)) -> Result<Frame> {
    if out_width == 0 || out_height == 0 {
        return Err(Error::Dimension {
            width: out_width,
            height: out_height,
        });
    }
    let channels = frame.channels();
    if !(scale.0 > 0.0 && scale.1 > 0.0) {
        return Err(Error::Config(alloc::format!("resampling scale {scale:?} must be positive")));
    }
    let xs = axis_taps(out_width, frame.width(), scale.0);
    let ys = axis_taps(out_height, frame.height(), scale.1);
    let mut pixels = Vec::with_capacity(out_width * out_height * channels);
    for ty in &ys {
        for tx in &xs {
            for c in 0..channels {
                let mut acc = 0.0f64;
                for (&sy, &wy) in ty.index.iter().zip(&ty.weight) {
                    let mut row = 0.0f64;
                    for (&sx, &wx) in tx.index.iter().zip(&tx.weight) {
                        row += wx * frame.sample(sx, sy, c) as f64;
                    }
                    acc += wy * row;
                }
                pixels.push(acc.clamp(0.0, 1.0) as f32);
            }
        }
    }
    Frame::new(frame.index(), out_width, out_height, channels, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn weights_sum_to_one_at_every_phase() {
        for i in 0..=1000 {
            let (_, w) = cubic_weights(3.0 + i as f64 / 1000.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_stays_constant() {
        let frame = Frame::new(0, 9, 7, 3, vec![0.4; 9 * 7 * 3]).unwrap();
        for (w, h) in [(3, 2), (9, 7), (20, 13), (1, 1)] {
            let out = bicubic_resample(&frame, w, h).unwrap();
            assert!(out.pixels().iter().all(|&v| (v - 0.4).abs() < 1e-6));
        }
    }

    #[test]
    fn unit_scale_is_identity() {
        let pixels: Vec<f32> = (0..48).map(|i| (i * 37 % 48) as f32 / 47.0).collect();
        let frame = Frame::new(3, 8, 6, 1, pixels.clone()).unwrap();
        let out = bicubic_resample(&frame, 8, 6).unwrap();
        assert_eq!(out.pixels(), &pixels[..]);
        assert_eq!(out.index(), 3);
    }

    #[test]
    fn zero_output_is_rejected() {
        let frame = Frame::new(0, 2, 2, 1, vec![0.0; 4]).unwrap();
        assert!(bicubic_resample(&frame, 0, 1).is_err());
    }
}
