use thiserror::Error;

/// Errors produced by the seafloor toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal length {len} is not a power of two")]
    NotPowerOfTwo { len: usize },

    #[error("wavelet level {level} out of range 1..={lmax}")]
    LevelOutOfRange { level: usize, lmax: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("sampling point ({x:.4}, {y:.4}) lies outside the field domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("solution residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("library is empty")]
    EmptyLibrary,

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported library version {0}")]
    Version(u32),

    #[error("checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerical pipeline (solver, residual checks).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::Residual { .. })
    }

    /// True for malformed inputs read from disk.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Version(_)
                | Error::Checksum { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::EmptyLibrary
        )
    }
}
