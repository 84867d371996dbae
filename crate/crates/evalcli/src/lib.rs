//! Evaluation front end: WAV plumbing, degradation simulators, metrics, and
//! experiment sweeps around the `tfrestore` core.

pub mod degrade;
pub mod experiment;
pub mod metrics;
pub mod synth;
pub mod wav;

/// CLI-side error type; wraps core errors and I/O.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tfrestore::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("target out of range: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
    pub fn range(msg: impl Into<String>) -> Self {
        CliError::Range(msg.into())
    }
}
