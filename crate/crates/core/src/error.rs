use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e} after inverse FFT")]
    ImaginaryResidueExceeded { residue: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("incompatible rectangular dimensions: m = {m}, n = {n}")]
    IncompatibleDimensions { m: usize, n: usize },

    #[error("operator power check failed: {0}")]
    InvalidOperatorPowers(String),

    #[error("singular displacement: |1 - ab| = {0:e}")]
    SingularDisplacement(f64),

    #[error("Cauchy pole collision: s[{i}] == t[{j}]")]
    CauchyPoleCollision { i: usize, j: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX data: need {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },

    #[error("IDX dimensions overflow addressable size")]
    DimensionOverflow,

    #[error("IDX file holds no items")]
    EmptyDataset,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
