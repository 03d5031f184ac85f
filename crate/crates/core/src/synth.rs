//! Deterministic synthetic fixtures for tracker tests.
//!
//! A 64x24 text-like plate (dark glyph strokes on a light background) is
//! rendered over a noisy background with integer pixel math and a seeded
//! SplitMix64 generator, so fixtures are identical on every platform. The
//! ground-truth document is emitted alongside the frames.

use alloc::string::String;
use alloc::vec::Vec;

use crate::annotation::{AnnotationDocument, BoundingBox, BoxSource, Entry, Instance, VideoMeta};
use crate::imgproc::Frame;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x7e47_2b1c_5eed_0001;

/// Base target size in pixels.
pub const TARGET_W: u32 = 64;
pub const TARGET_H: u32 = 24;

/// Horizontal speed of the translating fixtures, pixels per frame.
pub const TRANSLATION_STEP: u32 = 2;

/// Per-frame zoom as the rational `ZOOM_NUM / ZOOM_DEN` (1.005).
pub const ZOOM_NUM: u128 = 201;
pub const ZOOM_DEN: u128 = 200;

/// 1-based inclusive frame range in which the occlusion fixture hides the
/// target.
pub const OCCLUSION_FRAMES: (u32, u32) = (40, 60);

const PLATE: u8 = 225;
const INK: u8 = 30;
const GLYPHS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Translation,
    Zoom,
    Occlusion,
}

impl Motion {
    pub fn name(self) -> &'static str {
        match self {
            Motion::Translation => "translation",
            Motion::Zoom => "zoom",
            Motion::Occlusion => "occlusion",
        }
    }
}

impl core::str::FromStr for Motion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(Motion::Translation),
            "zoom" => Ok(Motion::Zoom),
            "occlusion" => Ok(Motion::Occlusion),
            other => Err(Error::Config(alloc::format!("unknown motion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub motion: Motion,
    pub length: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(motion: Motion, length: usize) -> Self {
        Self {
            motion,
            length,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub frames: Vec<Frame>,
    pub truth: AnnotationDocument,
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Glyph bitmaps: 3 columns x 6 rows of 2x3-pixel blocks per character.
struct Glyphs([[[bool; 3]; 6]; GLYPHS]);

impl Glyphs {
    fn new(rng: &mut SplitMix64) -> Self {
        let mut g = [[[false; 3]; 6]; GLYPHS];
        for glyph in g.iter_mut() {
            for row in glyph.iter_mut() {
                for bit in row.iter_mut() {
                    *bit = rng.below(100) < 45;
                }
            }
            // Keep every glyph visibly inked.
            glyph[0][1] = true;
            glyph[5][1] = true;
        }
        Self(g)
    }

    /// Intensity at base-texture pixel `(u, v)`, `0 <= u < 64`, `0 <= v < 24`.
    fn texel(&self, u: i64, v: i64) -> u8 {
        if !(3..21).contains(&v) {
            return PLATE;
        }
        let ch = (u / 8) as usize;
        let gx = u % 8;
        if gx == 0 || gx == 7 {
            return PLATE;
        }
        let col = ((gx - 1) / 2) as usize;
        let row = ((v - 3) / 3) as usize;
        if self.0[ch][row][col] {
            INK
        } else {
            PLATE
        }
    }
}

struct Canvas {
    background: Vec<u8>,
}

impl Canvas {
    fn new(width: u32, height: u32, rng: &mut SplitMix64) -> Self {
        let background = (0..width * height).map(|_| 70 + rng.below(60) as u8).collect();
        Self { background }
    }

    /// Background plus fresh per-frame noise in `[-8, 8]`.
    fn noisy(&self, rng: &mut SplitMix64) -> Vec<u8> {
        self.background
            .iter()
            .map(|&b| (b as i32 + rng.below(17) as i32 - 8).clamp(0, 255) as u8)
            .collect()
    }
}

/// Renders a fixture and its exact ground truth.
pub fn render(config: &SynthConfig) -> Result<SynthVideo> {
    if config.length < 2 {
        return Err(Error::Config("synthetic fixtures need at least 2 frames".into()));
    }
    let mut rng = SplitMix64(config.seed);
    let glyphs = Glyphs::new(&mut rng);
    let n = config.length as u32;
    let (frames, boxes) = match config.motion {
        Motion::Translation | Motion::Occlusion => {
            let hide = (config.motion == Motion::Occlusion).then_some(OCCLUSION_FRAMES);
            render_translation(n, hide, &glyphs, &mut rng)?
        }
        Motion::Zoom => render_zoom(n, &glyphs, &mut rng)?,
    };
    let (width, height) = frames[0].dims();
    let mut truth = AnnotationDocument::new(VideoMeta {
        name: String::from("synth-") + config.motion.name(),
        n_frame: n,
        width: width as u32,
        height: height as u32,
        trim: None,
    });
    truth.instances.push(Instance {
        id: "01".into(),
        stopped_at: None,
        transcription: None,
        entries: boxes
            .into_iter()
            .enumerate()
            .map(|(i, bbox)| Entry {
                frame: i as u32 + 1,
                bbox,
                source: BoxSource::Manual,
                confidence: None,
            })
            .collect(),
    });
    Ok(SynthVideo { frames, truth })
}

type Rendered = (Vec<Frame>, Vec<BoundingBox>);

fn render_translation(n: u32, hide: Option<(u32, u32)>, glyphs: &Glyphs, rng: &mut SplitMix64) -> Result<Rendered> {
    let margin = 20;
    let width = 2 * margin + TARGET_W + TRANSLATION_STEP * (n - 1);
    let height = 120;
    let y0 = 48;
    let canvas = Canvas::new(width, height, rng);
    let mut frames = Vec::with_capacity(n as usize);
    let mut boxes = Vec::with_capacity(n as usize);
    for k in 0..n {
        let x0 = margin + TRANSLATION_STEP * k;
        let mut px = canvas.noisy(rng);
        let hidden = hide.is_some_and(|(a, b)| (a..=b).contains(&(k + 1)));
        if !hidden {
            for v in 0..TARGET_H {
                for u in 0..TARGET_W {
                    px[((y0 + v) * width + x0 + u) as usize] = glyphs.texel(u as i64, v as i64);
                }
            }
        }
        frames.push(Frame::from_u8(k as usize, width as usize, height as usize, 1, &px)?);
        boxes.push(BoundingBox::new(x0 as f64, y0 as f64, TARGET_W as f64, TARGET_H as f64));
    }
    Ok((frames, boxes))
}

fn render_zoom(n: u32, glyphs: &Glyphs, rng: &mut SplitMix64) -> Result<Rendered> {
    const ONE: u128 = 1 << 32;
    let mut scales = Vec::with_capacity(n as usize);
    let mut s = ONE;
    for _ in 0..n {
        scales.push(s);
        s = s * ZOOM_NUM / ZOOM_DEN;
    }
    let last = *scales.last().expect("n >= 2");
    let max_w = (TARGET_W as u128 * last).div_ceil(ONE) as u32;
    let max_h = (TARGET_H as u128 * last).div_ceil(ONE) as u32;
    let width = max_w + 80;
    let height = max_h + 80;
    let (cx, cy) = ((width / 2) as i64, (height / 2) as i64);
    let canvas = Canvas::new(width, height, rng);
    let mut frames = Vec::with_capacity(n as usize);
    let mut boxes = Vec::with_capacity(n as usize);
    for (k, &s) in scales.iter().enumerate() {
        let mut px = canvas.noisy(rng);
        let two_s = 2 * s as i128;
        for y in 0..height as i64 {
            // Base coordinate of the pixel center in texture units.
            let v = ((2 * (y - cy) + 1) as i128 * ONE as i128).div_euclid(two_s) + (TARGET_H / 2) as i128;
            if !(0..TARGET_H as i128).contains(&v) {
                continue;
            }
            for x in 0..width as i64 {
                let u = ((2 * (x - cx) + 1) as i128 * ONE as i128).div_euclid(two_s) + (TARGET_W / 2) as i128;
                if (0..TARGET_W as i128).contains(&u) {
                    px[(y * width as i64 + x) as usize] = glyphs.texel(u as i64, v as i64);
                }
            }
        }
        frames.push(Frame::from_u8(k, width as usize, height as usize, 1, &px)?);
        let factor = s as f64 / ONE as f64;
        boxes.push(BoundingBox::from_center(
            cx as f64,
            cy as f64,
            TARGET_W as f64 * factor,
            TARGET_H as f64 * factor,
        ));
    }
    Ok((frames, boxes))
}

/// Ground-truth boxes of a fixture, as the frame-1 entry of each instance.
pub fn first_boxes(truth: &AnnotationDocument) -> Vec<BoundingBox> {
    truth
        .instances
        .iter()
        .filter_map(|i| i.entry_at(1).map(|e| e.bbox))
        .collect()
}
