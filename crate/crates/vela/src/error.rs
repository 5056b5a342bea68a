use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("strain energy evaluation returned a non-finite value")]
    Evaluation,

    #[error("matrix is singular or nearly singular (det = {det})")]
    Singular { det: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("field shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported derivative order: sigma = {sigma}, theta = {theta}")]
    Capability { sigma: usize, theta: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("state invalid: {0}")]
    StateInvalid(String),

    #[error("solution blew up at t = {t}")]
    Blowup { t: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    Format(String),
}
