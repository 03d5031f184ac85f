//! JSON encoding of annotation documents, first-frame box files and
//! detector imports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use textrbl_core::pipeline::FirstFrameBoxes;
use textrbl_core::{AnnotationDocument, BoundingBox, BoxSource, SCHEMA_VERSION};

use crate::error::{Error, Result};

/// Canonical text form: two-space indented JSON in declaration field order,
/// shortest round-trip float formatting, trailing newline.
pub fn to_json(doc: &AnnotationDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}

/// Parses and validates a document. A missing or foreign schema tag is
/// reported before any structural parsing.
pub fn from_json(text: &str) -> Result<AnnotationDocument> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::json("document", e))?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: found.to_string(),
            expected: SCHEMA_VERSION,
        });
    }
    let doc: AnnotationDocument = serde_json::from_value(value).map_err(|e| Error::json("document", e))?;
    check(&doc)?;
    Ok(doc)
}

fn check(doc: &AnnotationDocument) -> Result<()> {
    let report = doc.validate();
    if report.is_valid() {
        Ok(())
    } else {
        Err(textrbl_core::Error::Validation(report).into())
    }
}

pub fn load(path: &Path) -> Result<AnnotationDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

/// Validates and writes a document.
pub fn save(path: &Path, doc: &AnnotationDocument) -> Result<()> {
    check(doc)?;
    write_atomic(path, to_json(doc).as_bytes())
}

/// Writes through a sibling temporary file so readers never see a partial
/// document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Frame-1 boxes of a document, in instance order. Every one of them must
/// be a manual entry.
pub fn first_boxes(doc: &AnnotationDocument) -> Result<FirstFrameBoxes> {
    let mut boxes = Vec::new();
    for inst in &doc.instances {
        let entry = inst.entry_at(1).ok_or_else(|| {
            Error::Usage(format!("instance {} has no frame-1 box", inst.id))
        })?;
        if entry.source != BoxSource::Manual {
            return Err(Error::Usage(format!(
                "instance {} frame-1 box is {:?}, expected manual",
                inst.id, entry.source
            )));
        }
        boxes.push(entry.bbox);
    }
    Ok(FirstFrameBoxes::manual(boxes))
}

pub fn load_first_boxes(path: &Path) -> Result<FirstFrameBoxes> {
    first_boxes(&load(path)?)
}

/// Detector output for frame 1: a list of polygons, each a list of `[x, y]`
/// vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub polygons: Vec<Vec<[f64; 2]>>,
}

pub fn load_detections(path: &Path) -> Result<FirstFrameBoxes> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let det: Detections = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    let polygons: Vec<Vec<(f64, f64)>> = det
        .polygons
        .iter()
        .map(|p| p.iter().map(|&[x, y]| (x, y)).collect())
        .collect();
    Ok(FirstFrameBoxes::from_polygons(&polygons)?)
}

/// Parses `x,y,w,h`.
pub fn parse_box(s: &str) -> Result<BoundingBox> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Usage(format!("box {s:?} is not x,y,w,h")))?;
    match parts[..] {
        [x, y, w, h] => Ok(BoundingBox::new(x, y, w, h)),
        _ => Err(Error::Usage(format!("box {s:?} needs exactly four numbers"))),
    }
}
