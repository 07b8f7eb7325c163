use thiserror::Error;

/// Everything that can go wrong inside the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside admissible domain: {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("coefficient must be positive, found {value} ({what})")]
    NonPositiveCoefficient { what: &'static str, value: f64 },

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("no admissible Newton step: damping fell below {damping_min:e}")]
    StepNotAdmissible { damping_min: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),

    #[error("outer coupling loop did not converge after {iters} iterations (update {update:e})")]
    OuterNoConvergence { iters: usize, update: f64 },

    #[error("step {step} aborted after {retries} time-step reductions: {source}")]
    AbortedAfterRetries {
        step: usize,
        retries: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error{}: {message}", location_suffix(*line, key.as_deref()))]
    Parse {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn location_suffix(line: Option<usize>, key: Option<&str>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l}, key `{k}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" at key `{k}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// True for failures that a smaller time step may cure.
    pub fn is_step_failure(&self) -> bool {
        matches!(
            self,
            Error::NewtonDiverged { .. }
                | Error::StepNotAdmissible { .. }
                | Error::LinearSolveFailed(_)
                | Error::OuterNoConvergence { .. }
                | Error::Domain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
