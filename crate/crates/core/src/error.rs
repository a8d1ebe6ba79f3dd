use thiserror::Error;

/// Errors raised while building or evaluating a cohort model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("state space must contain at least one state")]
    EmptyStateSpace,
    #[error("state label {0} is blank")]
    BlankLabel(usize),
    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("schedule contains no matrices")]
    EmptySchedule,
    #[error("matrix {matrix}, row {row}: entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange {
        matrix: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("matrix {matrix}, row {row}: only the diagonal may be implied (column {col})")]
    ImpliedOffDiagonal {
        matrix: usize,
        row: usize,
        col: usize,
    },
    #[error("matrix {matrix}, row {row}: off-diagonal probabilities sum to {sum} > 1")]
    NegativeResidual { matrix: usize, row: usize, sum: f64 },
    #[error("matrix {matrix}, row {row}: row sums to {sum}, not 1")]
    NotStochastic { matrix: usize, row: usize, sum: f64 },
    #[error("horizon of {horizon} cycles exceeds the {available} matrices in the schedule")]
    HorizonExceedsSchedule { horizon: usize, available: usize },
    #[error("invalid occupancy distribution: {0}")]
    InvalidDistribution(String),
    #[error("indicator vector must contain exactly one 1 and zeros elsewhere")]
    BadIndicator,
    #[error("counts sum to {found}, expected cohort size {expected}")]
    CountMismatch { expected: u64, found: u64 },
    #[error("cohort size must be at least 1")]
    EmptyCohort,
}
