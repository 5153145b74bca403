use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("orbit exceeded magnitude cap {cap:e}")]
    OverflowEscape { cap: f64 },

    #[error("pole coincides with the evaluation point")]
    PoleAtPoint,

    #[error("root finding failed: chordal residual {residual:e} exceeds {tolerance:e}{}", word_suffix(.word))]
    RootFindingFailure {
        residual: f64,
        tolerance: f64,
        word: Option<Vec<usize>>,
    },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid generator system: {0}")]
    InvalidSystem(String),

    #[error("depth {requested} requested but tree has {available} levels")]
    DepthUnavailable { requested: usize, available: usize },

    #[error("partition function is infinite (critical branch present)")]
    InfinitePressure,

    #[error("no sign change on bracket [{lo}, {hi}]: objective {f_lo} .. {f_hi}")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("tree contains critical branches; Bowen root undefined")]
    CriticalBranchPresent,

    #[error("tail fit indeterminate: {0}")]
    IndeterminateTail(String),

    #[error("value {0} outside [0, 2]")]
    RangeError(f64),

    #[error("point cloud is degenerate")]
    DegenerateCloud,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid partition: {0}")]
    PartitionError(String),

    #[error("{what} exceeded cap {cap}")]
    CapExceeded { what: &'static str, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn word_suffix(word: &Option<Vec<usize>>) -> String {
    match word {
        Some(w) => format!(" (word {w:?})"),
        None => String::new(),
    }
}

impl Error {
    /// Attaches the offending generator word to a root-finding failure.
    pub fn with_word(self, w: &[usize]) -> Self {
        match self {
            Error::RootFindingFailure {
                residual, tolerance, ..
            } => Error::RootFindingFailure {
                residual,
                tolerance,
                word: Some(w.to_vec()),
            },
            other => other,
        }
    }

    /// True for failures caused by the numerics rather than by the input.
    pub fn is_numeric(&self) -> bool {
        !matches!(
            self,
            Error::Io(_)
                | Error::InvalidMap(_)
                | Error::InvalidSystem(_)
                | Error::InvalidArgument(_)
                | Error::PartitionError(_)
        )
    }
}
