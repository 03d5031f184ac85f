//! Response-based confidence scoring that stops drifting trackers.
//!
//! A tracker is declared failed at frame `t` when its response peak is both
//! low in absolute terms (`M_t < alpha`) and has dropped well below the peak
//! of its first tracked frame (`M_t - M_1 < beta`). Both comparisons are
//! strict, so a value sitting exactly on a threshold keeps the track alive.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureParams {
    /// Absolute response threshold.
    pub alpha: f64,
    /// Response-drop threshold (negative).
    pub beta: f64,
}

impl FailureParams {
    pub const DEFAULT: Self = Self {
        alpha: 0.25,
        beta: -0.2,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let params = Self { alpha, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(alloc::format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta < 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(alloc::format!("beta must be negative, got {}", self.beta)));
        }
        Ok(())
    }
}

impl Default for FailureParams {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Active,
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub frame: u32,
    pub response_max: f64,
    pub response_drop: f64,
    /// 1 keeps tracking, 0 stops.
    pub score: u8,
}

impl ConfidenceRecord {
    pub fn is_failure(&self) -> bool {
        self.score == 0
    }
}

pub fn confidence(first_max: f64, current_max: f64, frame: u32, params: &FailureParams) -> Result<ConfidenceRecord> {
    if !first_max.is_finite() || !current_max.is_finite() {
        return Err(Error::NonFinite("response maxima"));
    }
    let response_drop = current_max - first_max;
    let failed = current_max < params.alpha && response_drop < params.beta;
    Ok(ConfidenceRecord {
        frame,
        response_max: current_max,
        response_drop,
        score: if failed { 0 } else { 1 },
    })
}

/// Status transition for a confidence record; `Stopped` is absorbing.
pub fn apply(status: TrackStatus, record: &ConfidenceRecord) -> TrackStatus {
    match status {
        TrackStatus::Stopped => TrackStatus::Stopped,
        TrackStatus::Active if record.is_failure() => TrackStatus::Stopped,
        TrackStatus::Active => TrackStatus::Active,
    }
}
