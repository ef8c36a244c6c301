use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Step size underflow during integration.
    #[error("integration failed at r = {last_radius:e}: {reason}")]
    Integration { last_radius: f64, reason: String },

    /// A component exceeded the overflow guard.
    #[error("solution blew up: U_{component} > {limit} at r = {radius:e}")]
    Blowup {
        component: usize,
        radius: f64,
        limit: f64,
    },

    #[error("radius {r:e} outside the profile range [0, {r_max:e}]")]
    OutOfRange { r: f64, r_max: f64 },

    #[error("summary extraction failed: {0}")]
    Extraction(String),

    #[error("no real root: discriminant {discriminant:e} < 0")]
    NoRealRoot { discriminant: f64 },

    #[error("region undefined for rho = 0")]
    UndefinedRegion,

    /// Newton or fixed-point iteration gave up; carries the best iterate seen.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("evaluation at the singular point x = p")]
    Singularity,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("wrong regime: {0}")]
    WrongRegime(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }
}
