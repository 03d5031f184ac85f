use std::path::PathBuf;

use serde::Serialize;
use textrbl_core::annotation::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] textrbl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported schema version {found:?} (expected {expected:?})")]
    SchemaVersion { found: String, expected: &'static str },
    #[error("{0}")]
    Usage(String),
    #[error("no frames found in {0}")]
    EmptyVideo(PathBuf),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Machine-readable error body shared by the CLI (stderr) and the service.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    pub detail: serde_json::Value,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        use textrbl_core::Error as C;
        match self {
            Error::Core(c) => match c {
                C::Dimension { .. } | C::DimensionMismatch(_) => "dimension",
                C::NumericConsistency { .. } | C::NonFinite(_) => "numeric",
                C::Geometry(_) => "geometry",
                C::Config(_) => "config",
                C::TrackerStopped => "tracker_stopped",
                C::Frame { .. } => "frame",
                C::UnknownInstance(_) => "unknown_instance",
                C::Validation(_) => "validation",
            },
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "not_found",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Json { .. } => "parse",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Usage(_) => "usage",
            Error::EmptyVideo(_) => "empty_video",
        }
    }

    pub fn validation_report(&self) -> Option<&ValidationReport> {
        match self {
            Error::Core(textrbl_core::Error::Validation(r)) => Some(r),
            _ => None,
        }
    }

    pub fn body(&self) -> ErrorBody {
        use serde_json::json;
        let detail = match self {
            Error::Core(textrbl_core::Error::Validation(r)) => json!({ "violations": r.violations }),
            Error::Core(textrbl_core::Error::Frame { index, .. }) => json!({ "frame_index": index }),
            Error::Core(textrbl_core::Error::UnknownInstance(id)) => json!({ "instance": id }),
            Error::Io { path, .. } | Error::Image { path, .. } => json!({ "path": path }),
            Error::SchemaVersion { found, expected } => json!({ "found": found, "expected": expected }),
            Error::EmptyVideo(path) => json!({ "path": path }),
            _ => serde_json::Value::Null,
        };
        ErrorBody {
            code: self.code(),
            message: self.to_string(),
            detail,
        }
    }
}
