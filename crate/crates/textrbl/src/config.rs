//! Tool configuration files.
//!
//! A config file is a JSON object with optional `tracker`,
//! `failure_detection`, `port` and `data_dir` keys. Tracker keys overlay the
//! selected preset, so a file may name only the values it changes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use textrbl_core::{FailureParams, TrackerParams};

use crate::error::{Error, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "TEXTRBL_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackerPreset {
    #[default]
    Kcf,
    Samf,
}

impl TrackerPreset {
    pub fn params(self) -> TrackerParams {
        match self {
            TrackerPreset::Kcf => TrackerParams::kcf(),
            TrackerPreset::Samf => TrackerParams::samf(),
        }
    }
}

impl std::str::FromStr for TrackerPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kcf" => Ok(Self::Kcf),
            "samf" => Ok(Self::Samf),
            other => Err(Error::Usage(format!("unknown tracker {other:?} (kcf or samf)"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub tracker: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(default)]
    pub failure_detection: Option<FailureParams>,
    #[serde(default)]
    pub port: Option<u16>,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// The explicit path if given, else the file named by [`CONFIG_ENV`],
    /// else an empty config.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn tracker_params(&self, preset: TrackerPreset) -> Result<TrackerParams> {
        overlay(preset.params(), self.tracker.as_ref())
    }
}

/// Applies partial tracker settings on top of `base` and validates the result.
pub fn overlay(base: TrackerParams, changes: Option<&serde_json::Map<String, serde_json::Value>>) -> Result<TrackerParams> {
    let mut value = serde_json::to_value(&base).expect("params serialize");
    if let (Some(obj), Some(changes)) = (value.as_object_mut(), changes) {
        for (k, v) in changes {
            if !obj.contains_key(k) {
                return Err(Error::Usage(format!("unknown tracker parameter {k:?}")));
            }
            obj.insert(k.clone(), v.clone());
        }
    }
    let params: TrackerParams = serde_json::from_value(value).map_err(|e| Error::json("tracker parameters", e))?;
    params.validate()?;
    Ok(params)
}
