use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("empty grid: {0}")]
    EmptyGrid(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point outside the evaluation domain: {0}")]
    OutsideDomain(String),
    #[error("inadmissible barrier exponent: {0}")]
    InadmissibleGamma(String),
    #[error("geometry failure: {0}")]
    Geometry(String),
    #[error("solver stagnated after {iterations} iterations (relative residual {residual:.3e})")]
    Stagnation {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("bad bracket: {0}")]
    BadBracket(String),
    #[error("iteration collapse: {0}")]
    IterationCollapse(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
