use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("camera pose must have unit scale, got {0}")]
    NonUnitCameraScale(f64),

    #[error("box does not overlap the grid")]
    EmptyOverlap,

    #[error("degenerate correspondence set: {0}")]
    DegenerateCorrespondences(String),

    #[error("degenerate camera: {0}")]
    DegenerateCamera(String),

    #[error("misaligned fields: {0}")]
    MisalignedFields(String),

    #[error("empty support")]
    EmptySupport,

    #[error("no matched pairs")]
    EmptyMatchSet,

    #[error("frame index mismatch: {0}")]
    FrameIndexMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used for CLI error reports and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidTransform(_) => "invalid_transform",
            Error::NonUnitCameraScale(_) => "non_unit_camera_scale",
            Error::EmptyOverlap => "empty_overlap",
            Error::DegenerateCorrespondences(_) => "degenerate_correspondences",
            Error::DegenerateCamera(_) => "degenerate_camera",
            Error::MisalignedFields(_) => "misaligned_fields",
            Error::EmptySupport => "empty_support",
            Error::EmptyMatchSet => "empty_match_set",
            Error::FrameIndexMismatch(_) => "frame_index_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
