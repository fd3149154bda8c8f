use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: column `{0}` not found")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("dataset needs at least 2 rows, found {0}")]
    EmptyData(usize),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("axis {axis}: lower bound must be strictly below upper bound")]
    BadBounds { axis: usize },
    #[error("axis {axis}: resolution must be at least 1")]
    ZeroResolution { axis: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subsample size {b} infeasible for population of {n}")]
    BadSize { n: usize, b: usize },
    #[error("number of replicates must be positive")]
    ZeroReplicates,
    #[error("subsample of {size} units is below twice the minimum leaf size {min_leaf}")]
    TooSmall { size: usize, min_leaf: usize },
    #[error("k = {k} is invalid for a subsample of {size} units")]
    BadK { k: usize, size: usize },
    #[error("kernel has no support at the query point")]
    EmptySupport,
    #[error("moment requires nuisance values that were not supplied")]
    MissingNuisance,
    #[error("moment requires a treatment indicator")]
    MissingTreatment,
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
    #[error("treatment arm {arm} has no units")]
    EmptyArm { arm: u8 },
    #[error("invalid fitting scheme: {0}")]
    BadScheme(String),
    #[error("moment equation is ill-posed: |denominator| = {denominator:e} below floor {floor:e}")]
    IllPosed { denominator: f64, floor: f64 },
    #[error("half-sampling needs an even sample size, got {0}")]
    OddN(usize),
    #[error("fold {fold} has odd size {size}")]
    OddFold { fold: usize, size: usize },
    #[error("binomial subsample size stayed degenerate after {0} redraws")]
    DegenerateQ(usize),
    #[error("need at least {needed} bootstrap replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("enumeration needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("kernel order {b} invalid for sample of {n}")]
    BadOrder { b: usize, n: usize },
    #[error("kernel is not declared centered under the working law")]
    NotCentered,
    #[error("Hoeffding tables are limited to order 3, got {0}")]
    OrderTooHigh(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Numeric failures (as opposed to bad input or exhausted budgets).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::EmptySupport | Error::IllPosed { .. } | Error::DegenerateQ(_)
        )
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
