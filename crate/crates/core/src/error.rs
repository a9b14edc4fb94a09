use thiserror::Error;

/// Errors surfaced by simulator operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A site or sub-box is not contained where the operation requires it.
    #[error("containment error: {0}")]
    Containment(String),

    /// Vector lengths or box dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Box volume does not fit the platform integer size.
    #[error("box overflow: {0}")]
    Overflow(String),

    /// A coupling precondition (initial sitewise order) does not hold.
    #[error("initial order violated at site {site:?}: lower={lower}, upper={upper}")]
    InitialOrder {
        site: Vec<i64>,
        lower: i8,
        upper: i8,
    },

    /// An operation requires a configuration in the good set H.
    #[error("configuration is not in H: {0}")]
    NotInH(String),

    /// Speed calibration found no surviving trials.
    #[error("calibration failure: {0}")]
    CalibrationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
