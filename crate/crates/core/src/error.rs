use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weight {index} is {value}; weights must be strictly positive")]
    NonpositiveWeight { index: usize, value: f64 },

    #[error("horizon must be positive and grid size at least 1 (T = {horizon}, N = {steps})")]
    NonpositiveHorizon { horizon: f64, steps: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error{}: {message}", location(.field, .line, .column))]
    Parse {
        field: Option<String>,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("problem too large: m*N = {0} exceeds 10^7")]
    TooLarge(usize),

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("reachability matrix is rank deficient (Phi Phi^T singular to working precision)")]
    RankDeficient,

    #[error("exhaustive search bound exceeded: m*N = {0} > 24")]
    ExhaustiveBoundExceeded(usize),

    #[error("polish failed: {0}")]
    PolishFailed(String),

    #[error("solver did not reach optimality: {0}")]
    Solver(String),

    #[error("no admissible control exists")]
    Infeasible,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn location(field: &Option<String>, line: &Option<usize>, column: &Option<usize>) -> String {
    let mut s = String::new();
    if let Some(f) = field {
        s.push_str(&format!(" in field \"{f}\""));
    }
    if let Some(l) = line {
        s.push_str(&format!(" at line {l}"));
        if let Some(c) = column {
            s.push_str(&format!(", column {c}"));
        }
    }
    s
}

impl Error {
    pub(crate) fn field(field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            field: Some(field.to_string()),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
