use thiserror::Error;

use crate::validate::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("invalid cost function: {0}")]
    InvalidCost(String),

    #[error("degenerate coordinator state: xi[{agent}][{agent}] = {value}")]
    DegenerateCoordinator { agent: usize, value: f64 },

    #[error("invalid internal model: {0}")]
    InvalidInternalModel(String),

    #[error("Sylvester equation has no unique solution (spectral gap {gap:e})")]
    NoUniqueSylvesterSolution { gap: f64 },

    #[error("{what} is not Hurwitz (max real part {max_real_part})")]
    NotHurwitz { what: String, max_real_part: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("non-finite value at t = {t} in {block}")]
    NonFinite { t: f64, block: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
