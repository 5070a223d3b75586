use thiserror::Error;

/// Errors produced by the solvers, the problem loader and the command line front end.
#[derive(Debug, Error)]
pub enum TurnpikeError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("control weight Q is not symmetric positive definite")]
    SingularQ,
    #[error("pair (A, B) is not stabilizable: uncontrollable eigenvalue {re} + {im}i")]
    NotStabilizable { re: f64, im: f64 },
    #[error("pair (A, C) is not detectable: unobservable eigenvalue {re} + {im}i")]
    NotDetectable { re: f64, im: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa})")]
    NotHurwitz { abscissa: f64 },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("matrix exponential overflowed")]
    ExpOverflow,
    #[error("I - S(period) is numerically singular")]
    SingularMonodromy,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("boundary coupling matrix is singular")]
    SingularCoupling,
    #[error("period handling failed: {0}")]
    PeriodMismatch(String),
    #[error("Crank-Nicolson system is singular at step {step}")]
    SingularDiscretization { step: usize },
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("strong Legendre condition violated: smallest eigenvalue of -H_uu is {min_eig:e}")]
    LegendreViolation { min_eig: f64 },
    #[error("H_yu H_uu^-1 H_uy - H_yy is indefinite: smallest eigenvalue {min_eig:e}")]
    IndefiniteCtC { min_eig: f64 },
    #[error("Newton Jacobian is singular")]
    SingularJacobian,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("no exponential decay detected (best rate {rate})")]
    NoDecay { rate: f64 },
    #[error("bad subdomain: {0}")]
    BadSubdomain(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid problem field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TurnpikeError>;

pub(crate) fn dim_err(what: &'static str, expected: impl ToString, got: impl ToString) -> TurnpikeError {
    TurnpikeError::DimensionMismatch {
        what,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
