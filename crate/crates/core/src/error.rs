use thiserror::Error;

use crate::model::PopulationState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("outside model domain: {0}")]
    Domain(String),

    /// The integrator hit `t_max` or `max_steps` before the residual dropped
    /// below the steady-state threshold.
    #[error("no steady state for n={n} by t={}: residual {residual:e}", last.t)]
    Convergence {
        n: f64,
        last: PopulationState,
        residual: f64,
    },

    #[error("numerical failure at n={n}, t={t}: {detail}")]
    NumericalFailure { n: f64, t: f64, detail: String },

    #[error("speedup is undefined for c_s = 0")]
    UndefinedSpeedup,

    #[error("closed form is singular: {0}")]
    SingularFormula(String),

    #[error("sweep row n={n}: {source}")]
    Sweep {
        n: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("degenerate axis range: first and last n are both {0}")]
    DegenerateRange(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::NumericalFailure { .. } => "numerical-failure",
            Error::UndefinedSpeedup => "undefined-speedup",
            Error::SingularFormula(_) => "singular-formula",
            Error::Sweep { source, .. } => source.kind(),
            Error::Parse { .. } => "parse",
            Error::DegenerateRange(_) => "degenerate-range",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
