use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing target column `{0}`")]
    MissingTargetColumn(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unparseable cell at row {row}, column `{column}`: {value:?}")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("no informative features")]
    NoInformativeFeatures,
    #[error("feature index {index} out of range for {width} features")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("clause-count mismatch: {left} vs {right}")]
    ClauseCountMismatch { left: usize, right: usize },
    #[error("feature `{0}` has no complement column")]
    MissingComplement(String),
    #[error("unsupported model version `{0}`")]
    ModelVersion(String),
    #[error("malformed model file, line {line}: {message}")]
    MalformedModel { line: usize, message: String },
    #[error("malformed wdimacs, line {line}: {message}")]
    MalformedWdimacs { line: usize, message: String },
    #[error("malformed solver output: {0}")]
    MalformedSolverOutput(String),
    #[error("cost mismatch: solver reported {reported}, recomputed {recomputed}")]
    CostMismatch { reported: u64, recomputed: u64 },
    #[error("assignment has {found} values, the query needs {expected}")]
    AssignmentLength { expected: usize, found: usize },
    #[error("invalid model from external solver")]
    InvalidExternalModel,
    #[error("failed to launch solver `{command}`: {message}")]
    SolverLaunch { command: String, message: String },
    #[error("brute-force solver is capped at {cap} variables, formula has {vars}")]
    VarCapExceeded { vars: usize, cap: usize },
    #[error("solver stopped before finding any hard-satisfying assignment")]
    NoIncumbent,
    #[error("hard clauses are unsatisfiable")]
    HardUnsat,
    #[error("contradictory pins on feature {feature} in clause {clause}")]
    ContradictoryPins { feature: usize, clause: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
