use std::path::PathBuf;

/// Errors produced by `vcal-core`.
///
/// Every variant has a stable machine-readable name (see [`Error::kind`]) that
/// the CLI reports on stderr.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("cannot write {path}: {reason}")]
    UnwritableFile { path: PathBuf, reason: String },

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("mask is {mask_h}x{mask_w} but image is {image_h}x{image_w}")]
    MaskShapeMismatch {
        mask_h: usize,
        mask_w: usize,
        image_h: usize,
        image_w: usize,
    },

    #[error("mask file {path} is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    DimsMismatch {
        path: PathBuf,
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },

    #[error("geometry does not fit in a {height}x{width} mask: {detail}")]
    GeometryOutOfBounds {
        height: usize,
        width: usize,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("confidence label {0} is outside [0, 100]")]
    InvalidConfidence(i64),

    #[error("invalid image tensor: {0}")]
    InvalidTensor(String),

    #[error("field `{0}` must not be empty")]
    EmptyField(&'static str),

    #[error("confidence grid is empty")]
    EmptyGrid,

    #[error("loss input stream is empty")]
    EmptyStream,

    #[error("metric input is empty")]
    EmptyInput,

    #[error("need at least one positive and one negative outcome (got {positives} positive, {negatives} negative)")]
    DegenerateClasses { positives: usize, negatives: usize },

    #[error("correlation undefined: {0}")]
    DegenerateSeries(String),

    #[error("invalid log-probability input: {0}")]
    InvalidLogProb(String),

    #[error("no confidence value found in {0:?}")]
    Unparseable(String),

    #[error("record {0} has no candidate with a parseable confidence")]
    NoParseableCandidate(String),

    #[error("no records left after excluding {failures} parse failures")]
    EmptyAfterFiltering { failures: usize },

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Stable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnreadableFile { .. } => "UnreadableFile",
            Error::UnwritableFile { .. } => "UnwritableFile",
            Error::UnsupportedImage { .. } => "UnsupportedImage",
            Error::MaskShapeMismatch { .. } => "MaskShapeMismatch",
            Error::DimsMismatch { .. } => "DimsMismatch",
            Error::GeometryOutOfBounds { .. } => "GeometryOutOfBounds",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidConfidence(_) => "InvalidConfidence",
            Error::InvalidTensor(_) => "InvalidTensor",
            Error::EmptyField(_) => "EmptyField",
            Error::EmptyGrid => "EmptyGrid",
            Error::EmptyStream => "EmptyStream",
            Error::EmptyInput => "EmptyInput",
            Error::DegenerateClasses { .. } => "DegenerateClasses",
            Error::DegenerateSeries(_) => "DegenerateSeries",
            Error::InvalidLogProb(_) => "InvalidLogProb",
            Error::Unparseable(_) => "Unparseable",
            Error::NoParseableCandidate(_) => "NoParseableCandidate",
            Error::EmptyAfterFiltering { .. } => "EmptyAfterFiltering",
            Error::DuplicateId(_) => "DuplicateId",
            Error::MalformedLine { .. } => "MalformedLine",
            Error::Internal(_) => "Internal",
        }
    }

    /// True for failures caused by the caller's input rather than by a bug or
    /// the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Internal(_) | Error::UnwritableFile { .. })
    }

    pub(crate) fn unreadable(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::UnreadableFile {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn unwritable(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::UnwritableFile {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
