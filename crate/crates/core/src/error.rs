use thiserror::Error;

/// Errors raised across the simulation, analytics and statistics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("query out of range: {0}")]
    Range(String),

    /// The simulated window does not reach far enough back (or forward) to
    /// resolve the requested genealogy.
    #[error("insufficient window: {0}")]
    InsufficientWindow(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleSize { needed: usize, got: usize },

    #[error("degenerate binning: {0}")]
    DegenerateBinning(String),
}

pub type Result<T> = std::result::Result<T, Error>;
