use thiserror::Error;

/// Errors raised by the solvers, oracles and model evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Frey-Stremme denominator `1 - rho*lambda*p/S` is non-positive.
    #[error("singular volatility: 1 - feedback*lambda*p/S = {denominator:.3e} <= 0")]
    SingularVolatility { denominator: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("numeric failure in {module}: {detail}")]
    Numeric { module: &'static str, detail: String },

    /// The queried asset price lies in the immediate-exercise region.
    #[error("S = {spot} lies in the exercise region (boundary {boundary}); value is the intrinsic {intrinsic}")]
    ExerciseRegion {
        spot: f64,
        boundary: f64,
        intrinsic: f64,
    },

    #[error("{module} failed at tau = {tau}: {source}")]
    Step {
        module: &'static str,
        tau: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn numeric(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_tau(self, module: &'static str, tau: f64) -> Self {
        Error::Step {
            module,
            tau,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping `Step` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
