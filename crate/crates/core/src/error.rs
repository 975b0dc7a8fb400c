use thiserror::Error;

/// Errors surfaced by the trajectory-flow pipeline.
///
/// The variants map onto process exit codes: `Config`, `Input`, `Io` and
/// `Limit` are caller problems (exit 1), `Invariant` means internal state
/// violated a documented contract (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("refused: {0}")]
    Limit(String),

    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
