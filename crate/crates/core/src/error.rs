use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // data loading
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("outcome value `{value}` at row {row} is not 0/1")]
    NonBinaryOutcome { row: usize, value: String },
    #[error("treatment value `{value}` at row {row} is not 0/1")]
    NonBinaryTreatment { row: usize, value: String },
    #[error("cannot parse cell at row {row}, column `{col}`: `{value}`")]
    UnparseableCell { row: usize, col: String, value: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("duplicate covariate name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{column}` has {levels} distinct values (limit {limit})")]
    TooManyLevels { column: String, levels: usize, limit: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // model fitting
    #[error("quasi-separation detected after {iterations} iterations")]
    QuasiSeparation { iterations: usize },
    #[error("Fisher information is singular")]
    SingularInformation,
    #[error("target has no variation")]
    NoVariation,

    // estimation
    #[error("propensity score {value} at row {row} is outside (0, 1)")]
    DegeneratePropensity { row: usize, value: f64 },
    #[error("treatment arm {arm} is empty")]
    EmptyArm { arm: u8 },
    #[error("bread matrix is singular")]
    SingularBread,
    #[error("non-finite entry in numeric Jacobian at ({row}, {col})")]
    JacobianNonFinite { row: usize, col: usize },
    #[error("stacked estimating equation {component} not solved: |sum psi| = {residual:e}")]
    StackNotSolved { component: usize, residual: f64 },
    #[error("{method} is not available for {target}")]
    Unsupported { method: String, target: String },

    // resampling and intervals
    #[error("{failures} of {requested} bootstrap replicates failed")]
    ExcessiveFailures { failures: usize, requested: usize },
    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
    #[error("standard error must be non-negative, got {0}")]
    NegativeSe(f64),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    // data generation
    #[error("bisection bracket [{lo}, {hi}] does not contain the target")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("calibration missed target {target}: achieved {achieved} (tolerance {tolerance:e})")]
    CalibrationMissed { target: f64, achieved: f64, tolerance: f64 },
    #[error("stratum {arm} has {available} subjects, need {needed}")]
    StratumExhausted { arm: u8, available: usize, needed: usize },
    #[error("invalid population file: {0}")]
    PopulationFormat(String),

    // simulation
    #[error("{failures} of {reps} Monte Carlo replications failed")]
    ExcessiveRepFailures { failures: usize, reps: usize },
    #[error("need at least 2 successful replications, got {0}")]
    TooFewReps(usize),
    #[error("invalid scenario grid: {0}")]
    InvalidGrid(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Fit and estimation failures that a resampling loop may tolerate by
    /// dropping the replicate.
    pub fn is_replicate_failure(&self) -> bool {
        matches!(
            self,
            Error::QuasiSeparation { .. }
                | Error::SingularInformation
                | Error::NoVariation
                | Error::EmptyArm { .. }
                | Error::DegeneratePropensity { .. }
        )
    }

    /// Process exit code: 2 for usage and configuration errors, 3 for
    /// input/output and file-format errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidGrid(_) | Error::InvalidLevel(_) | Error::Unsupported { .. } => 2,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::PopulationFormat(_)
            | Error::MissingColumn(_)
            | Error::NonBinaryOutcome { .. }
            | Error::NonBinaryTreatment { .. }
            | Error::UnparseableCell { .. }
            | Error::EmptyDataset
            | Error::TooFewRows(_)
            | Error::DuplicateColumn(_)
            | Error::UnknownColumn(_)
            | Error::TooManyLevels { .. } => 3,
            _ => 1,
        }
    }

    /// Short stable tag used in failure tallies and report files.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::NonBinaryOutcome { .. } => "NonBinaryOutcome",
            Error::NonBinaryTreatment { .. } => "NonBinaryTreatment",
            Error::UnparseableCell { .. } => "UnparseableCell",
            Error::EmptyDataset => "EmptyDataset",
            Error::TooFewRows(_) => "TooFewRows",
            Error::DuplicateColumn(_) => "DuplicateColumn",
            Error::TooManyLevels { .. } => "TooManyLevels",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::QuasiSeparation { .. } => "QuasiSeparation",
            Error::SingularInformation => "SingularInformation",
            Error::NoVariation => "NoVariation",
            Error::DegeneratePropensity { .. } => "DegeneratePropensity",
            Error::EmptyArm { .. } => "EmptyArm",
            Error::SingularBread => "SingularBread",
            Error::JacobianNonFinite { .. } => "JacobianNonFinite",
            Error::StackNotSolved { .. } => "StackNotSolved",
            Error::Unsupported { .. } => "Unsupported",
            Error::ExcessiveFailures { .. } => "ExcessiveFailures",
            Error::TooFewReplicates { .. } => "TooFewReplicates",
            Error::NegativeSe(_) => "NegativeSE",
            Error::InvalidLevel(_) => "InvalidLevel",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::CalibrationMissed { .. } => "CalibrationMissed",
            Error::StratumExhausted { .. } => "StratumExhausted",
            Error::PopulationFormat(_) => "PopulationFormat",
            Error::ExcessiveRepFailures { .. } => "ExcessiveRepFailures",
            Error::TooFewReps(_) => "TooFewReps",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::Config { .. } => "ConfigError",
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
