//! Annotation document model and its invariants.
//!
//! A document holds every instance track of one video (or one degraded
//! variant of it). Frame numbers in documents are 1-based; `Frame::index`
//! is 0-based, so document frame `t` is frame index `t - 1`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::failure::FailureParams;
use crate::tracker::TrackerParams;
use crate::SCHEMA_VERSION;

/// Up-right rectangle in continuous pixel coordinates; `(x, y)` is the
/// top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.w > 0.0 && self.h > 0.0
    }

    /// Every coordinate and size multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.x * factor, self.y * factor, self.w * factor, self.h * factor)
    }

    pub fn intersects_frame(&self, width: f64, height: f64) -> bool {
        self.x < width && self.right() > 0.0 && self.y < height && self.bottom() > 0.0
    }

    /// Smallest up-right rectangle enclosing a polygon.
    pub fn enclosing(points: &[(f64, f64)]) -> Option<Self> {
        let first = points.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.0, first.1, first.0, first.1);
        for &(x, y) in &points[1..] {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let bbox = Self::new(x0, y0, x1 - x0, y1 - y0);
        bbox.is_valid().then_some(bbox)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxSource {
    Manual,
    Tracked,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub frame: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub source: BoxSource,
    /// Response peak of the tracker for tracked entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    #[serde(default)]
    pub stopped_at: Option<u32>,
    /// Optional free-text transcription; unused by every operation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
    pub entries: Vec<Entry>,
}

impl Instance {
    pub fn entry_at(&self, frame: u32) -> Option<&Entry> {
        let first = self.entries.first()?.frame;
        let idx = frame.checked_sub(first)? as usize;
        self.entries.get(idx).filter(|e| e.frame == frame)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.entries.last().map(|e| e.frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub name: String,
    pub n_frame: u32,
    pub width: u32,
    pub height: u32,
    /// 1-based inclusive frame range of the source directory, when trimmed.
    #[serde(default)]
    pub trim: Option<[u32; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Degradation {
    None,
    Blur { n: u32 },
    Lr { m: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub schema: String,
    pub video: VideoMeta,
    #[serde(default)]
    pub tracker: Option<TrackerParams>,
    #[serde(default)]
    pub failure_detection: Option<FailureParams>,
    pub degradation: Degradation,
    /// Name of the raw-video document a degraded variant was derived from.
    #[serde(default)]
    pub source_document: Option<String>,
    pub instances: Vec<Instance>,
}

impl AnnotationDocument {
    pub fn new(video: VideoMeta) -> Self {
        Self {
            schema: SCHEMA_VERSION.to_string(),
            video,
            tracker: None,
            failure_detection: None,
            degradation: Degradation::None,
            source_document: None,
            instances: Vec::new(),
        }
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Boxes present at a frame, in instance order.
    pub fn boxes_at(&self, frame: u32) -> Vec<(&str, BoundingBox)> {
        self.instances
            .iter()
            .filter_map(|i| i.entry_at(frame).map(|e| (i.id.as_str(), e.bbox)))
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// One failed invariant, located as precisely as possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(default)]
    pub instance: Option<String>,
    #[serde(default)]
    pub frame: Option<u32>,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, instance: Option<&str>, frame: Option<u32>, field: &str, message: String) {
        self.violations.push(Violation {
            instance: instance.map(String::from),
            frame,
            field: field.to_string(),
            message,
        });
    }
}

impl core::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for v in &self.violations {
            write!(f, "{}", v.field)?;
            if let Some(id) = &v.instance {
                write!(f, " [instance {id}]")?;
            }
            if let Some(frame) = v.frame {
                write!(f, " [frame {frame}]")?;
            }
            writeln!(f, ": {}", v.message)?;
        }
        Ok(())
    }
}

fn is_instance_label(id: &str) -> bool {
    id.len() >= 2 && id.bytes().all(|b| b.is_ascii_digit())
}

/// Checks every document invariant and reports all violations found.
pub fn validate(doc: &AnnotationDocument) -> ValidationReport {
    let mut report = ValidationReport::default();
    if doc.schema != SCHEMA_VERSION {
        report.push(None, None, "schema", format!("expected {SCHEMA_VERSION:?}, found {:?}", doc.schema));
    }
    let video = &doc.video;
    if video.n_frame == 0 {
        report.push(None, None, "video.n_frame", "must be at least 1".into());
    }
    if video.width == 0 || video.height == 0 {
        report.push(None, None, "video.geometry", format!("{}x{} frame", video.width, video.height));
    }
    if let Some([a, b]) = video.trim {
        if a == 0 || b < a || b - a + 1 != video.n_frame {
            report.push(None, None, "video.trim", format!("range {a}:{b} does not cover {} frames", video.n_frame));
        }
    }
    if let Some(params) = &doc.tracker {
        if let Err(e) = params.validate() {
            report.push(None, None, "tracker", e.to_string());
        }
    }
    if let Some(fd) = &doc.failure_detection {
        if let Err(e) = fd.validate() {
            report.push(None, None, "failure_detection", e.to_string());
        }
    }
    match doc.degradation {
        Degradation::Blur { n: 0 } => report.push(None, None, "degradation.n", "must be at least 1".into()),
        Degradation::Lr { m: 0 } => report.push(None, None, "degradation.m", "must be at least 1".into()),
        _ => {}
    }

    let mut seen = BTreeSet::new();
    for inst in &doc.instances {
        validate_instance(doc, inst, &mut report);
        if !seen.insert(inst.id.as_str()) {
            report.push(Some(&inst.id), None, "id", "duplicate instance id".into());
        }
    }
    report
}

fn validate_instance(doc: &AnnotationDocument, inst: &Instance, report: &mut ValidationReport) {
    let id = Some(inst.id.as_str());
    let n_frame = doc.video.n_frame;
    if !is_instance_label(&inst.id) {
        report.push(id, None, "id", "must be a zero-padded decimal label such as \"01\"".into());
    }
    let Some(first) = inst.entries.first() else {
        report.push(id, None, "entries", "instance has no entries".into());
        return;
    };
    if first.frame != 1 {
        report.push(id, Some(first.frame), "entries.frame", "track must start at frame 1".into());
    }
    for pair in inst.entries.windows(2) {
        let (prev, next) = (pair[0].frame, pair[1].frame);
        if next <= prev {
            report.push(id, Some(next), "entries.frame", format!("out of order after frame {prev}"));
        } else if next != prev + 1 {
            report.push(id, Some(next), "entries.frame", format!("gap after frame {prev}"));
        }
    }
    for e in &inst.entries {
        let at = Some(e.frame);
        if e.frame == 0 || e.frame > n_frame {
            report.push(id, at, "entries.frame", format!("outside 1..={n_frame}"));
        }
        let b = &e.bbox;
        if !b.is_finite() {
            report.push(id, at, "box", "non-finite coordinate".into());
        } else {
            if b.w <= 0.0 {
                report.push(id, at, "box.w", format!("width {} is not positive", b.w));
            }
            if b.h <= 0.0 {
                report.push(id, at, "box.h", format!("height {} is not positive", b.h));
            }
            if b.w > 0.0 && b.h > 0.0 && !b.intersects_frame(doc.video.width as f64, doc.video.height as f64) {
                report.push(id, at, "box", "box does not intersect the frame".into());
            }
        }
        match (e.source, e.confidence) {
            (_, Some(c)) if !c.is_finite() => {
                report.push(id, at, "confidence", "non-finite confidence".into());
            }
            (BoxSource::Tracked, None) => {
                report.push(id, at, "confidence", "tracked entry lacks a confidence value".into());
            }
            (BoxSource::Manual, Some(_)) => {
                report.push(id, at, "confidence", "manual entry carries a confidence value".into());
            }
            _ => {}
        }
        if e.source == BoxSource::Tracked && e.frame == 1 {
            report.push(id, at, "source", "frame 1 cannot be tracked".into());
        }
    }
    let last = inst.entries.last().map(|e| e.frame).unwrap_or(0);
    match inst.stopped_at {
        Some(stop) => {
            if stop < 2 || stop > n_frame {
                report.push(id, Some(stop), "stopped_at", format!("outside 2..={n_frame}"));
            } else if last + 1 != stop {
                report.push(id, Some(stop), "stopped_at", format!("entries end at frame {last}"));
            }
        }
        None => {
            if last != n_frame {
                report.push(id, Some(last), "entries", format!("track ends at frame {last} of {n_frame} without a stop"));
            }
        }
    }
}
