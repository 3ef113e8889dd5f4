use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("at sample {index} {point:?}: {source}")]
    AtSample {
        index: usize,
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("insufficient jet order: need {needed}, have {available}")]
    JetOrder { needed: usize, available: usize },
    #[error("singular or ill-conditioned Hessian (condition estimate {condition:e}) at {point:?}")]
    SingularHessian { point: Vec<f64>, condition: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("base point mismatch: {0}")]
    BaseMismatch(String),
    #[error("invalid structure constants: {0}")]
    InvalidStructure(String),
    #[error("level {level} exceeds order {order}")]
    Level { level: usize, order: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
