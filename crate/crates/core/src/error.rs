use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension {0}: only odd d in {{3, 5}} is implemented")]
    UnsupportedDimension(usize),

    #[error("kernel evaluation failed at nodes ({row}, {col}): {source}")]
    Assembly {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("determinant underflow/overflow at z = {z_re} + {z_im}i")]
    DeterminantRange { z_re: f64, z_im: f64 },

    #[error("I + K is numerically singular (condition estimate {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("contour count {value:.4} is not within 0.1 of an integer")]
    ContourRejected { value: f64 },

    #[error("region does not cover the requested set: {0}")]
    Coverage(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
