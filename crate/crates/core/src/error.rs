use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("phantom geometry: {0}")]
    SpecGeometry(String),
    #[error("scene contains no non-air cells")]
    EmptyScene,
    #[error("degenerate contour: {0}")]
    DegenerateContour(String),
    #[error("time step {dt:e} s exceeds the Courant limit {limit:e} s")]
    Stability { dt: f64, limit: f64 },
    #[error("point ({x:.4}, {y:.4}) m is outside the usable simulation domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("source ({x:.4}, {y:.4}) m lies outside the raster")]
    SourceOutOfDomain { x: f64, y: f64 },
    #[error("velocity map contains a non-positive or non-finite speed at cell {0}")]
    NonpositiveSpeed(usize),
    #[error("labels are degenerate: {0}")]
    DegenerateLabels(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting and FFI
    /// status codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::SpecGeometry(_) => "spec-geometry",
            Error::EmptyScene => "empty-scene",
            Error::DegenerateContour(_) => "degenerate-contour",
            Error::Stability { .. } => "stability",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Fit(_) => "fit",
            Error::SourceOutOfDomain { .. } => "source-out-of-domain",
            Error::NonpositiveSpeed(_) => "nonpositive-speed",
            Error::DegenerateLabels(_) => "degenerate-labels",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    /// Stable numeric code per category, 10..=24. The CLI exits with it and
    /// the FFI returns its negation.
    pub fn code(&self) -> i32 {
        match self {
            Error::SpecGeometry(_) => 10,
            Error::EmptyScene => 11,
            Error::DegenerateContour(_) => 12,
            Error::Stability { .. } => 13,
            Error::OutOfDomain { .. } => 14,
            Error::ShapeMismatch(_) => 15,
            Error::InsufficientData(_) => 16,
            Error::Fit(_) => 17,
            Error::SourceOutOfDomain { .. } => 18,
            Error::NonpositiveSpeed(_) => 19,
            Error::DegenerateLabels(_) => 20,
            Error::InvalidArgument(_) => 21,
            Error::Format { .. } => 22,
            Error::Config(_) => 23,
            Error::Io { .. } => 24,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
