use thiserror::Error;

/// Errors shared by all solver and simulation stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient evaluation returned a non-finite value.
    #[error("model evaluation produced a non-finite value at (t={t}, x={x}, r={r})")]
    ModelEvaluation { t: f64, x: f64, r: f64 },

    /// Invalid configuration of a solver, grid or estimator.
    #[error("configuration error: {0}")]
    Config(String),

    /// A precondition stated by an operation's contract was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The finite-volume step produced a negative or non-finite cell value.
    #[error("scheme failure at step {step} (t={t}): {detail}")]
    SchemeFailure { step: usize, t: f64, detail: String },

    /// The semi-implicit nonlinear solve did not converge.
    #[error("nonlinear solve failed at step {step}: residual {residual} after {iterations} iterations")]
    IterationFailure {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    /// A stochastic integration produced a non-finite state.
    #[error("integration failure at step {step}{}: non-finite state", particle.map(|p| format!(" (particle {p})")).unwrap_or_default())]
    IntegrationFailure { step: usize, particle: Option<usize> },

    /// Two densities were compared on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Two densities with different masses were fed to a mass-preserving metric.
    #[error("mass mismatch: |{0} - {1}| exceeds tolerance")]
    MassMismatch(f64, f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
