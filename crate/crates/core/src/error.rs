use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-positive depth {depth:e}")]
    Positivity { depth: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("implicit solve did not converge at x = {x}, t = {t} after {iterations} iterations")]
    Convergence { x: f64, t: f64, iterations: usize },

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("solution blew up at step {step} (t = {time:e}, stage {stage}): {detail}")]
    BlowUp {
        step: usize,
        time: f64,
        stage: usize,
        detail: String,
    },

    #[error("convergence order needs at least two refinement levels, got {0}")]
    EocUndefined(usize),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
