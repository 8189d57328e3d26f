use std::path::PathBuf;

/// Errors produced anywhere in the DJINN pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o failure on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("non-numeric cell at row {row}, column {column}")]
    NonNumeric { row: usize, column: String },

    #[error("missing target column `{0}`")]
    MissingColumn(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}: cost is {cost}")]
    Diverged { epoch: usize, cost: f64 },

    #[error("tree has no branch nodes")]
    NoBranches,

    #[error("topology does not describe this tree: {0}")]
    InconsistentTopology(String),

    #[error("infeasible sparsity budget for layer {layer}: {budget} nonzeros, need between {min} and {max}")]
    InfeasibleBudget {
        layer: usize,
        budget: usize,
        min: usize,
        max: usize,
    },

    #[error("pruning would leave hidden layer {layer} without neurons")]
    EmptyLayer { layer: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
