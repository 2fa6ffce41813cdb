use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("basis needs at least one couplet")]
    EmptyBasis,

    #[error("element label {0} is outside the basis")]
    LabelOutOfRange(String),

    #[error("steady-state solve failed at g = {g}: relative residual {residual:.3e} (threshold {threshold:.1e})")]
    SolverFailure { g: f64, residual: f64, threshold: f64 },

    #[error("linear system is singular at g = {g}")]
    Singular { g: f64 },

    #[error("count rate {value:.3e} is negative beyond the clamp tolerance")]
    PositivityViolation { value: f64 },

    #[error("time step {dt} does not resolve the fastest rate {rate} (need dt * rate <= {limit})")]
    StepTooLarge { dt: f64, rate: f64, limit: f64 },

    #[error("no-jump cycle incomplete: final norm {norm:.3e} exceeds {tolerance:.1e}; lengthen the trajectory")]
    IncompleteCycle { norm: f64, tolerance: f64 },

    #[error("trace drifted by {drift:.3e} at t = {time}")]
    TraceDrift { drift: f64, time: f64 },

    #[error("averaging window {window} is longer than the trajectory span {span}")]
    WindowTooLong { window: f64, span: f64 },

    #[error("invalid initial state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("at (g = {g}, delta_tilde = {delta_tilde}): {source}")]
    AtPoint {
        g: f64,
        delta_tilde: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips any [`Error::AtPoint`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::SolverFailure { .. } | Error::Singular { .. } | Error::PositivityViolation { .. }
        )
    }
}
