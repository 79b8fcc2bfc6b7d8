use thiserror::Error;

/// Errors shared by all solver and sampling modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("state became non-finite at step {step} (t = {time}); reduce dt or check model stiffness")]
    Divergence { step: usize, time: f64 },

    #[error("diffusion coefficient {value:.3e} at x = {x} is below the ellipticity floor {floor:.1e}")]
    Ellipticity { x: f64, value: f64, floor: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("no convergence within {max_iter} iterations; last residual {residual:.3e}")]
    IterationLimit { max_iter: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{context}: matrix is not Hurwitz, eigenvalue {eigenvalue} has nonnegative real part")]
    NotHurwitz { context: String, eigenvalue: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("x = {x} outside grid range [{min}, {max}]")]
    OutOfRange { x: f64, min: f64, max: f64 },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
