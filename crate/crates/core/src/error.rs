use thiserror::Error;

/// Errors raised across the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("factor space is empty")]
    EmptySpace,
    #[error("factor `{0}` declared more than once")]
    DuplicateFactor(String),
    #[error("factor `{factor}` has duplicate level `{level}`")]
    DuplicateLevel { factor: String, level: String },
    #[error("factor `{factor}` has {count} level(s); at least 2 are required")]
    TooFewLevels { factor: String, count: usize },
    #[error("grid of {size} configurations exceeds the enumeration cap {cap}")]
    GridTooLarge { size: u128, cap: u128 },
    #[error("configuration {0:?} is not valid for this factor space")]
    InvalidConfig(Vec<usize>),
    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),
    #[error("invalid reference distribution: {0}")]
    InvalidReference(String),
    #[error("row {row}: {message}")]
    Ingest { row: usize, message: String },
    #[error("unknown factor column `{0}`")]
    UnknownColumn(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: unknown level `{level}`")]
    UnknownLevel {
        row: usize,
        column: String,
        level: String,
    },
    #[error("total weight must be positive")]
    ZeroWeight,
    #[error("log is empty")]
    EmptyLog,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "rank-deficient design matrix (sigma_min = {sigma_min:e}); unidentified blocks: {blocks:?}"
    )]
    RankDeficient { sigma_min: f64, blocks: Vec<String> },
    #[error("background distribution is not product-form; exact coalition values are undefined")]
    NonProductBackground,
    #[error("configuration {0:?} is infeasible")]
    Infeasible(Vec<usize>),
    #[error("no feasible level for factor {factor} in context {context:?}")]
    EmptyCoordinate { factor: usize, context: Vec<usize> },
    #[error("configuration is not 1-swap optimal: switching factor {factor} to level {level} gains {gain:e}")]
    NotOneSwapOptimal {
        factor: usize,
        level: usize,
        gain: f64,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined for constant input")]
    ConstantInput,
    #[error("inconsistent factor spaces")]
    SpaceMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
