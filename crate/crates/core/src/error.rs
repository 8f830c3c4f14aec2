use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("non-finite linear predictor at t = {t}")]
    Recursion { t: usize },

    #[error("non-finite log-likelihood contribution at t = {t}")]
    Evaluation { t: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("line search failed after {iterations} iterations")]
    LineSearch { iterations: usize },

    #[error("test unavailable: {0}")]
    TestUnavailable(String),

    #[error("restricted model is not nested in the free model (LR = {lr})")]
    NotNested { lr: f64 },

    #[error("invalid request: {0}")]
    Request(String),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("design file: {0}")]
    Design(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
