use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at {0}")]
    NonFiniteValue(String),
    #[error("implausible normalized flow: {0}")]
    ImplausibleFlow(String),
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("confidence {value} out of [0, 1] on row {line}")]
    ConfidenceOutOfRange { line: usize, value: f64 },
    #[error("timestamps not strictly increasing at row {line}")]
    NonMonotonicTime { line: usize },
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("flow field is already normalized")]
    AlreadyNormalized,
    #[error("flow field is not normalized")]
    NotNormalized,
    #[error("frame too small: {height}x{width}, need at least 3x3")]
    FrameTooSmall { height: usize, width: usize },
    #[error("keypoint ({x}, {y}) outside {width}x{height} frame")]
    KeypointOutsideFrame {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty input")]
    EmptyInput,
    #[error("only {valid} of {total} frames usable (need fraction {required})")]
    InsufficientValidFrames {
        valid: usize,
        total: usize,
        required: f64,
    },
    #[error("segment [{t_start}, {t_end}] outside sequence span [0, {span}]")]
    SegmentOutOfRange { t_start: f64, t_end: f64, span: f64 },
    #[error("virtual axis {axis} has zero variance")]
    ZeroVarianceAxis { axis: usize },
    #[error("empty calibration reference")]
    EmptyReference,
    #[error("series too short: {samples} samples, window needs {window}")]
    SeriesTooShort { samples: usize, window: usize },
    #[error("empty window")]
    EmptyWindow,
    #[error("empty training set")]
    EmptyTraining,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("class {class} has {count} members, fewer than k={k}")]
    ClassTooSmall { class: u32, count: usize, k: usize },
    #[error("input times are not sorted ascending")]
    UnsortedInput,
    #[error("empty class set")]
    EmptyClassSet,
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate x values")]
    DegenerateX,
    #[error("zero variance input")]
    ZeroVariance,
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("failed to load data: {0}")]
    DataLoadFailed(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::ImplausibleFlow(_) => "ImplausibleFlow",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::ConfidenceOutOfRange { .. } => "ConfidenceOutOfRange",
            Error::NonMonotonicTime { .. } => "NonMonotonicTime",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::AlreadyNormalized => "AlreadyNormalized",
            Error::NotNormalized => "NotNormalized",
            Error::FrameTooSmall { .. } => "FrameTooSmall",
            Error::KeypointOutsideFrame { .. } => "KeypointOutsideFrame",
            Error::EmptySequence => "EmptySequence",
            Error::EmptyInput => "EmptyInput",
            Error::InsufficientValidFrames { .. } => "InsufficientValidFrames",
            Error::SegmentOutOfRange { .. } => "SegmentOutOfRange",
            Error::ZeroVarianceAxis { .. } => "ZeroVarianceAxis",
            Error::EmptyReference => "EmptyReference",
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::EmptyWindow => "EmptyWindow",
            Error::EmptyTraining => "EmptyTraining",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::UnsortedInput => "UnsortedInput",
            Error::EmptyClassSet => "EmptyClassSet",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::DegenerateX => "DegenerateX",
            Error::ZeroVariance => "ZeroVariance",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::DataLoadFailed(_) => "DataLoadFailed",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }

    /// True for errors caused by configuration rather than by data content.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigInvalid(_) | Error::InvalidParameter(_) | Error::Json(_)
        )
    }
}
