use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid camera pose: {0}")]
    InvalidPose(String),

    #[error("invalid vehicle prior: {0}")]
    InvalidPrior(String),

    #[error("degenerate detection: {0}")]
    DegenerateDetection(String),

    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    OutsideImage {
        u: f64,
        v: f64,
        width: f64,
        height: f64,
    },

    #[error("viewing ray through ({u}, {v}) does not reach the ground plane")]
    RayMissesGround { u: f64, v: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed detection JSON: {0}")]
    Json(String),

    #[error("config error: {0}")]
    Config(String),
}
