use thiserror::Error;

use crate::dsl::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric is not positive definite (smallest eigenvalue {min_eigenvalue:e}, trace {trace:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, trace: f64 },
    #[error("gradient of defining function {face} vanishes (norm {norm:e})")]
    VanishingGradient { face: usize, norm: f64 },
    #[error("seed point is outside the smoothed domain at lambda {lambda}: F(x0) = {value}; need lambda > {lambda0}")]
    SeedOutside { lambda: f64, value: f64, lambda0: f64 },
    #[error("no crossing of the smoothed boundary before t_max = {t_max}")]
    NoCrossing { t_max: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
