use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate 6D rotation: {0}")]
    DegenerateRotation(String),

    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),

    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),

    #[error("invalid cuboid: {0}")]
    InvalidCuboid(String),

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no dimension prior for category '{0}'")]
    UnknownCategory(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("referential error: {0}")]
    Referential(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}
