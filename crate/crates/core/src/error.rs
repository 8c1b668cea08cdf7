use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the numerical core and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    Asymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (lambda_min = {lambda_min:.6e}, floor = {floor:.3e})")]
    NotPsd { lambda_min: f64, floor: f64 },

    #[error("matrix is not positive definite (lambda_min = {lambda_min:.6e})")]
    NotPd { lambda_min: f64 },

    #[error("non-finite entries in {0}")]
    NonFinite(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Riccati flow blew up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("closed-loop matrix is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },

    #[error("singular Kronecker system in Lyapunov solve")]
    SingularLyapunov,

    #[error("singular Gramian {name} (lambda_min = {lambda_min:.3e})")]
    SingularGramian { name: &'static str, lambda_min: f64 },

    #[error("flows merged numerically (distance underflow) at t = {time}")]
    DistanceUnderflow { time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not an association scheme: {0}")]
    NotAScheme(String),

    #[error("eigenvalue grouping ambiguous after {attempts} attempts")]
    GroupingAmbiguity { attempts: usize },

    #[error("not a member of the algebra (deviation {deviation:.3e})")]
    NotAMember { deviation: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// True for failures caused by the numerics rather than by user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::NoConvergence { .. }
                | Error::NotHurwitz { .. }
                | Error::SingularLyapunov
                | Error::SingularGramian { .. }
                | Error::NonFinite(_)
                | Error::GroupingAmbiguity { .. }
        )
    }
}
