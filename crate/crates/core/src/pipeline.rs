//! Multi-instance propagation: first-frame boxes in, complete annotation
//! document out.
//!
//! Frame 1 records the given boxes and initializes one tracker per
//! instance. Every later frame runs detect, the optional failure check and
//! update for each active instance, in instance-ID order. Instances share
//! nothing, so the order only affects scheduling.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationDocument, BoundingBox, BoxSource, Entry, Instance, VideoMeta};
use crate::failure::{confidence, FailureParams, TrackStatus};
use crate::imgproc::Frame;
use crate::tracker::{TrackerParams, TrackerState};
use crate::{Error, Result};

/// Random-access frame sequence with uniform geometry. Indices are 0-based.
pub trait VideoSource {
    fn name(&self) -> &str;
    fn frame_count(&self) -> usize;
    /// `(width, height)` shared by every frame.
    fn geometry(&self) -> (usize, usize);
    /// 1-based inclusive range of the underlying sequence, when trimmed.
    fn trim(&self) -> Option<[u32; 2]> {
        None
    }
    fn frame(&self, index: usize) -> Result<Frame>;
}

/// Frames held in memory.
#[derive(Debug, Clone)]
pub struct InMemoryVideo {
    name: String,
    frames: Vec<Frame>,
}

impl InMemoryVideo {
    pub fn new(name: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Config("video has no frames".into()))?;
        let dims = first.dims();
        if let Some((i, _)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(Error::Frame {
                index: i,
                message: "frame geometry differs from frame 0".into(),
            });
        }
        Ok(Self {
            name: name.into(),
            frames,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

impl VideoSource for InMemoryVideo {
    fn name(&self) -> &str {
        &self.name
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn geometry(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        self.frames.get(index).cloned().ok_or_else(|| Error::Frame {
            index,
            message: "index out of range".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxOrigin {
    Manual,
    DetectorImport,
}

/// Boxes that seed the trackers on frame 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstFrameBoxes {
    pub origin: BoxOrigin,
    pub boxes: Vec<BoundingBox>,
}

impl FirstFrameBoxes {
    pub fn manual(boxes: Vec<BoundingBox>) -> Self {
        Self {
            origin: BoxOrigin::Manual,
            boxes,
        }
    }

    /// Detector output given as polygons; each becomes its enclosing
    /// up-right rectangle.
    pub fn from_polygons(polygons: &[Vec<(f64, f64)>]) -> Result<Self> {
        let boxes = polygons
            .iter()
            .enumerate()
            .map(|(i, p)| {
                BoundingBox::enclosing(p).ok_or_else(|| Error::Geometry(format!("polygon {i} encloses no area")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            origin: BoxOrigin::DetectorImport,
            boxes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub id: String,
    pub bbox: BoundingBox,
}

/// Two-digit (or wider) label for the `k`-th instance, counting from 1.
pub fn instance_label(k: usize) -> String {
    format!("{k:02}")
}

/// Numbers instances from the upper left: ascending top edge, then
/// ascending left edge.
pub fn assign_ids(first: &FirstFrameBoxes) -> Result<Vec<LabeledBox>> {
    if first.boxes.is_empty() {
        return Err(Error::Config("no first-frame boxes".into()));
    }
    if let Some(b) = first.boxes.iter().find(|b| !b.is_valid()) {
        return Err(Error::Geometry(format!("invalid box {b:?}")));
    }
    let mut order: Vec<BoundingBox> = first.boxes.clone();
    order.sort_by(|a, b| {
        a.y.total_cmp(&b.y)
            .then(a.x.total_cmp(&b.x))
            .then(a.w.total_cmp(&b.w))
            .then(a.h.total_cmp(&b.h))
    });
    if let Some(pair) = order.windows(2).find(|p| p[0] == p[1]) {
        return Err(Error::Geometry(format!("duplicate box {:?}", pair[0])));
    }
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, bbox)| LabeledBox {
            id: instance_label(i + 1),
            bbox,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub tracker: TrackerParams,
    /// `None` disables failure detection.
    pub failure: Option<FailureParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceProgress {
    pub id: String,
    pub status: TrackStatus,
    pub stopped_at: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub frames_done: u32,
    pub n_frame: u32,
    pub instances: Vec<InstanceProgress>,
}

struct Track {
    id: String,
    tracker: TrackerState,
    entries: Vec<Entry>,
    stopped_at: Option<u32>,
}

impl Track {
    fn start(id: String, frame: &Frame, t: u32, bbox: BoundingBox, source: BoxSource, params: &TrackerParams) -> Result<Self> {
        let tracker = TrackerState::init(frame, bbox, params.clone())?;
        Ok(Self {
            id,
            tracker,
            entries: alloc::vec![Entry {
                frame: t,
                bbox,
                source,
                confidence: None,
            }],
            stopped_at: None,
        })
    }

    fn step(&mut self, frame: &Frame, t: u32, failure: Option<&FailureParams>) -> Result<()> {
        if self.tracker.status() == TrackStatus::Stopped {
            return Ok(());
        }
        let detection = self.tracker.detect(frame)?;
        let peak = detection.response.peak;
        if let Some(fd) = failure {
            let reference = self.tracker.first_response_max().unwrap_or(peak);
            let record = confidence(reference, peak, t, fd)?;
            self.tracker.apply_confidence(&record);
            if self.tracker.status() == TrackStatus::Stopped {
                self.stopped_at = Some(t);
                return Ok(());
            }
        }
        self.tracker.update(frame, &detection)?;
        self.entries.push(Entry {
            frame: t,
            bbox: detection.bbox,
            source: BoxSource::Tracked,
            confidence: Some(peak),
        });
        Ok(())
    }

    fn progress(&self) -> InstanceProgress {
        InstanceProgress {
            id: self.id.clone(),
            status: self.tracker.status(),
            stopped_at: self.stopped_at,
        }
    }

    fn into_instance(self, transcription: Option<String>) -> Instance {
        Instance {
            id: self.id,
            stopped_at: self.stopped_at,
            transcription,
            entries: self.entries,
        }
    }
}

fn load_checked<V: VideoSource + ?Sized>(video: &V, index: usize) -> Result<Frame> {
    let frame = video.frame(index)?;
    if frame.dims() != video.geometry() {
        return Err(Error::Frame {
            index,
            message: format!(
                "geometry drift: {}x{} instead of {}x{}",
                frame.width(),
                frame.height(),
                video.geometry().0,
                video.geometry().1
            ),
        });
    }
    Ok(frame)
}

fn video_meta<V: VideoSource + ?Sized>(video: &V) -> VideoMeta {
    let (w, h) = video.geometry();
    VideoMeta {
        name: video.name().to_string(),
        n_frame: video.frame_count() as u32,
        width: w as u32,
        height: h as u32,
        trim: video.trim(),
    }
}

pub fn run_pipeline<V: VideoSource + ?Sized>(
    video: &V,
    first: &FirstFrameBoxes,
    config: &PipelineConfig,
) -> Result<AnnotationDocument> {
    run_pipeline_with_progress(video, first, config, &mut |_| {})
}

/// Like [`run_pipeline`], reporting progress after every frame.
pub fn run_pipeline_with_progress<V: VideoSource + ?Sized>(
    video: &V,
    first: &FirstFrameBoxes,
    config: &PipelineConfig,
    on_progress: &mut dyn FnMut(&Progress),
) -> Result<AnnotationDocument> {
    config.tracker.validate()?;
    if let Some(fd) = &config.failure {
        fd.validate()?;
    }
    let n_frame = video.frame_count();
    if n_frame < 2 {
        return Err(Error::Config(format!("tracking needs at least 2 frames, video has {n_frame}")));
    }
    let labeled = assign_ids(first)?;
    let frame = load_checked(video, 0)?;
    let mut tracks = labeled
        .into_iter()
        .map(|lb| Track::start(lb.id, &frame, 1, lb.bbox, BoxSource::Manual, &config.tracker))
        .collect::<Result<Vec<_>>>()?;
    let report = |tracks: &[Track], done: u32, on_progress: &mut dyn FnMut(&Progress)| {
        on_progress(&Progress {
            frames_done: done,
            n_frame: n_frame as u32,
            instances: tracks.iter().map(Track::progress).collect(),
        })
    };
    report(&tracks, 1, on_progress);
    for index in 1..n_frame {
        let frame = load_checked(video, index)?;
        let t = index as u32 + 1;
        for track in &mut tracks {
            track.step(&frame, t, config.failure.as_ref())?;
        }
        report(&tracks, t, on_progress);
    }
    let mut doc = AnnotationDocument::new(video_meta(video));
    doc.tracker = Some(config.tracker.clone());
    doc.failure_detection = config.failure;
    doc.instances = tracks.into_iter().map(|t| t.into_instance(None)).collect();
    Ok(doc)
}

/// Replaces one instance's track from `frame` onward: the corrected box is
/// recorded at `frame` and a fresh tracker propagates it to the end. Other
/// instances are left untouched.
pub fn retrack_from<V: VideoSource + ?Sized>(
    doc: &AnnotationDocument,
    video: &V,
    instance_id: &str,
    frame: u32,
    corrected: BoundingBox,
) -> Result<AnnotationDocument> {
    let pos = doc
        .instances
        .iter()
        .position(|i| i.id == instance_id)
        .ok_or_else(|| Error::UnknownInstance(instance_id.to_string()))?;
    let meta = video_meta(video);
    if (meta.n_frame, meta.width, meta.height) != (doc.video.n_frame, doc.video.width, doc.video.height) {
        return Err(Error::DimensionMismatch(format!(
            "video {}x{} with {} frames does not match the document",
            meta.width, meta.height, meta.n_frame
        )));
    }
    if frame == 0 || frame > doc.video.n_frame {
        return Err(Error::Config(format!("frame {frame} outside 1..={}", doc.video.n_frame)));
    }
    if !corrected.is_valid() {
        return Err(Error::Geometry(format!("invalid corrected box {corrected:?}")));
    }
    let old = &doc.instances[pos];
    let last = old.last_frame().unwrap_or(0);
    if frame > last + 1 {
        return Err(Error::Config(format!(
            "instance {instance_id} has no box after frame {last}; a correction at frame {frame} would leave a gap"
        )));
    }
    let params = doc.tracker.clone().unwrap_or_default();
    let failure = doc.failure_detection;
    let start = load_checked(video, frame as usize - 1)?;
    let mut track = Track::start(old.id.clone(), &start, frame, corrected, BoxSource::Corrected, &params)?;
    let mut entries: Vec<Entry> = old.entries.iter().filter(|e| e.frame < frame).cloned().collect();
    for index in frame as usize..doc.video.n_frame as usize {
        let current = load_checked(video, index)?;
        track.step(&current, index as u32 + 1, failure.as_ref())?;
        if track.stopped_at.is_some() {
            break;
        }
    }
    entries.append(&mut track.entries);
    track.entries = entries;
    let mut out = doc.clone();
    out.instances[pos] = track.into_instance(old.transcription.clone());
    Ok(out)
}
