use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular deformation: det F = {det:e} (must be > 0)")]
    SingularDeformation { det: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("field evaluation failed: {0}")]
    Domain(String),

    #[error("matrix is not orthogonal: |R^T R - I| = {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular parameters: {0}")]
    SingularParameter(String),

    #[error("inverted element: 1 + dpsi/dz = {stretch:e}")]
    InvertedElement { stretch: f64 },

    #[error("root branch lost at s = {s}: cubic roots collide ({detail})")]
    Branch { s: f64, detail: String },

    #[error("instability at t = {time}: max |phi| = {max_abs:e}")]
    Instability { time: f64, max_abs: f64 },

    #[error("grid too narrow: |phi - far field| = {residual:e} at the {side} end")]
    GridTooNarrow { side: &'static str, residual: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
