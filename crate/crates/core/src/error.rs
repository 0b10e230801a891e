use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {}x{}, got {}x{}", expected.0, expected.1, actual.0, actual.1)]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate splat scale (s_x = {s_x}, s_y = {s_y}); scales must be finite and >= {min}")]
    DegenerateScale { s_x: f64, s_y: f64, min: f64 },

    #[error("undefined boundary: mask has no {missing} pixels")]
    UndefinedBoundary { missing: &'static str },

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("malformed PGM payload: {0}")]
    MalformedPayload(String),

    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("unsupported magic number {0:?} (expected P2 or P5)")]
    UnsupportedMagic(String),

    #[error("{metric} is undefined for these counts (zero denominator)")]
    UndefinedMetric { metric: &'static str },

    #[error("input contains a single class; both positives and negatives are required")]
    SingleClass,

    #[error("non-finite gradient at parameter {index}")]
    PoisonedGradient { index: usize },

    #[error("objective is not finite at coordinate {index}")]
    NonFiniteEvaluation { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("generated shape has an empty {0}")]
    DegenerateShape(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateScale { .. }
                | Error::NonFinite { .. }
                | Error::PoisonedGradient { .. }
                | Error::NonFiniteEvaluation { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
