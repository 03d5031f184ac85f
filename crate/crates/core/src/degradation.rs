//! Paired blurry and low-resolution variants of a raw video.
//!
//! Blur averages a sliding window of `N + 1` frames at offsets
//! `i - floor(N / 2)` for `i = 0..=N`, clamped to the sequence ends, in 8-bit
//! intensity with round-half-up. Low resolution is a bicubic resample to
//! `floor(width / M) x floor(height / M)`.

use alloc::format;
use alloc::vec::Vec;

use crate::annotation::{AnnotationDocument, Degradation};
use crate::imgproc::{bicubic_resample_scaled, Frame};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlurConfig {
    pub n: usize,
}

impl BlurConfig {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("blur window parameter N must be at least 1".into()));
        }
        Ok(Self { n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LrConfig {
    pub m: usize,
}

impl LrConfig {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("downsampling multiple M must be at least 1".into()));
        }
        Ok(Self { m })
    }
}

/// Source indices averaged into output frame `t` of a `len`-frame video.
pub fn blur_window(t: usize, len: usize, cfg: BlurConfig) -> impl Iterator<Item = usize> {
    let back = (cfg.n / 2) as isize;
    let last = len as isize - 1;
    (0..=cfg.n).map(move |i| (t as isize + i as isize - back).clamp(0, last) as usize)
}

/// Per-pixel mean of equally sized frames with round-half-up.
pub fn average_frames(frames: &[&Frame], index: usize) -> Result<Frame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Config("nothing to average".into()))?;
    let dims = (first.width(), first.height(), first.channels());
    if frames.iter().any(|f| (f.width(), f.height(), f.channels()) != dims) {
        return Err(Error::DimensionMismatch("averaged frames differ in geometry".into()));
    }
    let count = frames.len() as u32;
    let mut sums = alloc::vec![0u32; first.pixels().len()];
    for f in frames {
        for (s, v) in sums.iter_mut().zip(f.to_u8()) {
            *s += v as u32;
        }
    }
    let bytes: Vec<u8> = sums.iter().map(|&s| ((2 * s + count) / (2 * count)) as u8).collect();
    Frame::from_u8(index, dims.0, dims.1, dims.2, &bytes)
}

/// Blurred frame `t` of `frames`.
pub fn blur_frame(frames: &[Frame], t: usize, cfg: BlurConfig) -> Result<Frame> {
    let window: Vec<&Frame> = blur_window(t, frames.len(), cfg).map(|i| &frames[i]).collect();
    average_frames(&window, frames[t].index())
}

pub fn blur_video(frames: &[Frame], cfg: BlurConfig) -> Result<Vec<Frame>> {
    (0..frames.len()).map(|t| blur_frame(frames, t, cfg)).collect()
}

pub fn lr_dims(width: usize, height: usize, cfg: LrConfig) -> Result<(usize, usize)> {
    if cfg.m > width || cfg.m > height {
        return Err(Error::Config(format!(
            "downsampling multiple {} exceeds the {width}x{height} frame",
            cfg.m
        )));
    }
    Ok((width / cfg.m, height / cfg.m))
}

pub fn lr_frame(frame: &Frame, cfg: LrConfig) -> Result<Frame> {
    let (w, h) = lr_dims(frame.width(), frame.height(), cfg)?;
    let scale = 1.0 / cfg.m as f64;
    bicubic_resample_scaled(frame, w, h, (scale, scale))
}

pub fn lr_video(frames: &[Frame], cfg: LrConfig) -> Result<Vec<Frame>> {
    frames.iter().map(|f| lr_frame(f, cfg)).collect()
}

/// Annotation of a raw video carried over to one of its degraded variants.
/// Blur keeps every box; low resolution divides coordinates and sizes by
/// `M` and shrinks the recorded frame geometry to match.
pub fn remap_annotations(doc: &AnnotationDocument, degradation: Degradation) -> Result<AnnotationDocument> {
    if doc.degradation != Degradation::None {
        return Err(Error::Config("only raw-video documents can be remapped".into()));
    }
    let mut out = doc.clone();
    out.degradation = degradation;
    out.source_document = Some(doc.video.name.clone());
    match degradation {
        Degradation::None => return Err(Error::Config("no degradation requested".into())),
        Degradation::Blur { n } => {
            BlurConfig::new(n as usize)?;
        }
        Degradation::Lr { m } => {
            let cfg = LrConfig::new(m as usize)?;
            let (w, h) = lr_dims(doc.video.width as usize, doc.video.height as usize, cfg)?;
            out.video.width = w as u32;
            out.video.height = h as u32;
            let factor = 1.0 / m as f64;
            for inst in &mut out.instances {
                for e in &mut inst.entries {
                    e.bbox = e.bbox.scaled(factor);
                }
            }
        }
    }
    Ok(out)
}
