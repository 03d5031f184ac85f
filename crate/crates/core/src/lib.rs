//! Numerical core for semi-automatic scene-text video annotation.
//!
//! A human labels up-right text boxes on the first frame; a kernelized
//! correlation-filter tracker (optionally with a scale pool) propagates each
//! box through the remaining frames, and a response-based confidence rule
//! stops trackers that have lost their target. The crate also produces the
//! paired blurry / low-resolution variants of a video and scores annotations
//! with IoU, mIoU and precision / recall / F-measure.
//!
//! Everything here is `no_std` with `alloc`. Frame decoding, JSON documents,
//! the CLI and the HTTP service live in the `textrbl` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod degradation;
mod error;
pub mod evaluation;
pub mod failure;
pub mod features;
pub mod imgproc;
pub mod pipeline;
pub mod synth;
pub mod tracker;

pub use annotation::{AnnotationDocument, BoundingBox, BoxSource, Degradation, Entry, Instance};
pub use error::{Error, Result};
pub use failure::{ConfidenceRecord, FailureParams, TrackStatus};
pub use imgproc::{ComplexPlane, Frame, RealPlane};
pub use tracker::{Detection, TrackerParams, TrackerState};

/// Schema tag written into every annotation document.
pub const SCHEMA_VERSION: &str = "text-rbl-annot/1";

/// Version tag of the built-in tracker parameter defaults.
pub const PARAMS_DEFAULTS_VERSION: &str = "kcf-gray-defaults/1";
