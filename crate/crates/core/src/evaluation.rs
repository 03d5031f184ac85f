//! IoU, per-instance mIoU and detection precision / recall / F-measure.
//!
//! Detection scoring matches boxes frame by frame: all (prediction,
//! reference) pairs with IoU above the threshold are visited in descending
//! IoU order (ties: lower prediction instance ID, then lower reference ID)
//! and a pair is accepted when both boxes are still free. A prediction is
//! correct when it is matched, and only IoU strictly larger than the
//! threshold counts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationDocument, BoundingBox, Instance};
use crate::{Error, Result};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union of two up-right boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Accepted `(prediction, reference, iou)` pairs for one frame. Inputs must
/// be in instance-ID order.
pub fn match_frame(predictions: &[BoundingBox], references: &[BoundingBox], threshold: f64) -> Vec<(usize, usize, f64)> {
    let mut candidates = Vec::new();
    for (p, pb) in predictions.iter().enumerate() {
        for (r, rb) in references.iter().enumerate() {
            let v = iou(pb, rb);
            if v > threshold {
                candidates.push((p, r, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut pred_used = alloc::vec![false; predictions.len()];
    let mut ref_used = alloc::vec![false; references.len()];
    let mut matches = Vec::new();
    for (p, r, v) in candidates {
        if !pred_used[p] && !ref_used[r] {
            pred_used[p] = true;
            ref_used[r] = true;
            matches.push((p, r, v));
        }
    }
    matches
}

/// `(frame, IoU)` for every frame where both instances have a box.
pub fn per_frame_iou(predicted: &Instance, reference: &Instance) -> Vec<(u32, f64)> {
    reference
        .entries
        .iter()
        .filter_map(|e| predicted.entry_at(e.frame).map(|p| (e.frame, iou(&p.bbox, &e.bbox))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouRow {
    pub id: String,
    /// Frames where both documents have a box for this instance.
    pub frames: u32,
    /// `None` when the two tracks never overlap in time.
    pub miou: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiouTable {
    pub rows: Vec<MiouRow>,
    /// Instance IDs present in only one of the two documents.
    pub uncovered: Vec<String>,
}

/// Mean per-frame IoU of every instance present in both documents, paired
/// by ID.
pub fn miou(predicted: &AnnotationDocument, reference: &AnnotationDocument) -> MiouTable {
    let mut table = MiouTable::default();
    for inst in &reference.instances {
        let Some(pred) = predicted.instance(&inst.id) else {
            table.uncovered.push(inst.id.clone());
            continue;
        };
        let series = per_frame_iou(pred, inst);
        let frames = series.len() as u32;
        let sum: f64 = series.iter().map(|(_, v)| v).sum();
        table.rows.push(MiouRow {
            id: inst.id.clone(),
            frames,
            miou: (frames > 0).then(|| sum / frames as f64),
        });
    }
    for inst in &predicted.instances {
        if reference.instance(&inst.id).is_none() {
            table.uncovered.push(inst.id.clone());
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub correct: u64,
    pub total_detections: u64,
    pub total_ground_truth: u64,
    pub miou: MiouTable,
}

/// Precision, recall and F-measure from raw counts. Empty denominators give 0.
pub fn prf_from_counts(correct: u64, detections: u64, ground_truth: u64) -> (f64, f64, f64) {
    let p = if detections == 0 { 0.0 } else { correct as f64 / detections as f64 };
    let r = if ground_truth == 0 { 0.0 } else { correct as f64 / ground_truth as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("IoU threshold {threshold} outside (0, 1)")));
    }
    Ok(())
}

/// Counts `(correct, detections, ground truth)` over per-frame box lists.
pub fn count_matches<'a>(
    frames: impl IntoIterator<Item = (&'a [BoundingBox], &'a [BoundingBox])>,
    threshold: f64,
) -> (u64, u64, u64) {
    let (mut correct, mut dets, mut gts) = (0u64, 0u64, 0u64);
    for (pred, refs) in frames {
        correct += match_frame(pred, refs, threshold).len() as u64;
        dets += pred.len() as u64;
        gts += refs.len() as u64;
    }
    (correct, dets, gts)
}

fn sorted_boxes(doc: &AnnotationDocument, frame: u32) -> Vec<BoundingBox> {
    let by_id: BTreeMap<&str, BoundingBox> = doc.boxes_at(frame).into_iter().collect();
    by_id.into_values().collect()
}

pub fn prf(predicted: &AnnotationDocument, reference: &AnnotationDocument, threshold: f64) -> Result<EvalReport> {
    check_threshold(threshold)?;
    let n = predicted.video.n_frame.max(reference.video.n_frame);
    let frames: Vec<(Vec<BoundingBox>, Vec<BoundingBox>)> = (1..=n)
        .map(|t| (sorted_boxes(predicted, t), sorted_boxes(reference, t)))
        .collect();
    let (correct, dets, gts) = count_matches(frames.iter().map(|(p, r)| (p.as_slice(), r.as_slice())), threshold);
    let (precision, recall, f_measure) = prf_from_counts(correct, dets, gts);
    Ok(EvalReport {
        iou_threshold: threshold,
        precision,
        recall,
        f_measure,
        correct,
        total_detections: dets,
        total_ground_truth: gts,
        miou: miou(predicted, reference),
    })
}

impl core::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(
            f,
            "P={:.4} R={:.4} F={:.4} (correct {} / detections {} / ground truth {}, IoU > {})",
            self.precision,
            self.recall,
            self.f_measure,
            self.correct,
            self.total_detections,
            self.total_ground_truth,
            self.iou_threshold
        )?;
        for row in &self.miou.rows {
            let value = row.miou.map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
            writeln!(f, "  {} mIoU {} over {} frames", row.id, value, row.frames)?;
        }
        if !self.miou.uncovered.is_empty() {
            writeln!(f, "  unpaired: {}", self.miou.uncovered.join(", "))?;
        }
        Ok(())
    }
}
