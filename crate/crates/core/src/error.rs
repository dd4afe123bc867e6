use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySamples,
    #[error("degenerate distribution")]
    DegenerateDistribution,
    #[error("undefined skewness")]
    UndefinedSkewness,
    #[error("percentile {0} outside (0, 100]")]
    PercentileOutOfRange(f64),
    #[error("zero occurrence count for value {0}")]
    ZeroCount(u64),
    #[error("malformed sample log at line {line}: {text:?}")]
    SampleLog { line: usize, text: String },

    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: usize, reason: String },
    #[error("task ids must be dense and 0-based; found {found} at position {position}")]
    TaskIds { position: usize, found: usize },
    #[error("budget {budget} is not in the catalog of task {task}")]
    BudgetNotInCatalog { task: usize, budget: u64 },
    #[error("assignment has {got} budgets for {expected} tasks")]
    AssignmentLength { expected: usize, got: usize },

    #[error("instance too large for brute force ({outcomes} outcomes, cap {cap})")]
    BruteForceTooLarge { outcomes: u128, cap: u128 },
    #[error("search space too large ({configurations} configurations, cap {cap})")]
    SearchSpaceTooLarge { configurations: u128, cap: u128 },
    #[error("unknown task id {0}")]
    UnknownTask(usize),

    #[error("scenario bucket unreachable for task {task} after {attempts} redraws")]
    BucketUnreachable { task: usize, attempts: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("all {trials} trials were discarded ({reasons})")]
    AllTrialsDiscarded { trials: usize, reasons: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
