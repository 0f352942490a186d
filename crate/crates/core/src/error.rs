use std::fmt;

use thiserror::Error;

/// Pipeline stage tags attached to propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ensemble,
    Gram,
    Sampling,
    Evaluation,
    Indices,
    Trotter,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Ensemble => "ensemble",
            Stage::Gram => "gram",
            Stage::Sampling => "sampling",
            Stage::Evaluation => "evaluation",
            Stage::Indices => "indices",
            Stage::Trotter => "trotter",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

/// Block of a Saltelli design a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignBlock {
    A,
    B,
    /// `A` with column `i` taken from `B`.
    AB(usize),
}

impl fmt::Display for DesignBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignBlock::A => f.write_str("A"),
            DesignBlock::B => f.write_str("B"),
            DesignBlock::AB(i) => write!(f, "AB[{i}]"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("Hermitian eigendecomposition did not converge")]
    EigenFailure,

    #[error("requested dimension {requested} exceeds direction-number capacity {capacity}")]
    DimensionExceeded { requested: usize, capacity: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("direction-number table, line {line}: {reason}")]
    DirectionTable { line: usize, reason: String },

    #[error("total variance {variance:e} is degenerate; first-order indices are undefined")]
    DegenerateVariance { variance: f64 },

    #[error("quadratic form {value:e} is negative beyond tolerance (scale {scale:e})")]
    NegativeForm { value: f64, scale: f64 },

    #[error("model failed at {block} row {row}: {message}")]
    Model {
        block: DesignBlock,
        row: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("malformed term-set container: {0}")]
    Container(String),

    #[error("malformed report: {0}")]
    Report(String),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures caused by the experiment configuration rather than
    /// by the numerics or the environment.
    pub fn is_config(&self) -> bool {
        match self {
            Error::ConfigInvalid(_)
            | Error::DimensionExceeded { .. }
            | Error::DegenerateVariance { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
