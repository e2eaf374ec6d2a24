use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    #[error("degenerate signal: standard deviation is zero")]
    DegenerateSignal,

    #[error("degenerate target: spread of the training signal is zero")]
    DegenerateTarget,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite nodal dynamics value at r = {r}")]
    Overflow { r: f64 },

    #[error("analysis failed: {message} (residual {residual:e})")]
    Analysis { message: String, residual: f64 },

    #[error("network construction failed: {0}")]
    Construction(String),

    #[error("spectral radius {radius} is not below 1")]
    SpectralRadius { radius: f64 },

    #[error("infeasible topology: rho_minus {rho_minus} exceeds rho_plus {rho_plus}")]
    InfeasibleTopology { rho_minus: f64, rho_plus: f64 },

    #[error("fixed point not found after {iterations} iterations (best residual {residual:e})")]
    FixedPointNotFound { iterations: usize, residual: f64 },

    #[error("truncated run: {needed} steps needed but only {available} usable")]
    TruncatedRun { needed: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for failures of an iterative numerical procedure (as opposed to
    /// bad input). The CLI maps these to a distinct exit status.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Analysis { .. }
                | Error::FixedPointNotFound { .. }
                | Error::SpectralRadius { .. }
                | Error::InfeasibleTopology { .. }
                | Error::Construction(_)
                | Error::IntegrationDiverged { .. }
                | Error::Overflow { .. }
        )
    }
}
