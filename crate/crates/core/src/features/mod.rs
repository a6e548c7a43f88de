//! Day- and user-level aggregation, price join, design matrices.

mod daily;
mod design;
mod join;
mod store;
mod users;

use chrono::NaiveDate;
use thiserror::Error;

pub use daily::{aggregate_daily, DailyAggregator, DailyFeatureRow, PriceJoin, LIKE_THRESHOLDS, RETWEET_THRESHOLDS};
pub use design::{
    assemble_design_matrix, assemble_raw, chronological_split, feature_columns, feature_vector, n_features, DesignMatrix,
    ScalerParams, Task, DEFAULT_TEST_FRACTION, MIN_SPLIT_ROWS,
};
pub use join::join_prices_and_label;
pub use store::{load_feature_store, read_feature_store, save_feature_store, store_header, write_feature_store};
pub use users::{aggregate_users, UserAggregate, UserAggregator};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no close price for {0}")]
    PriceCoverageGap(NaiveDate),
    #[error("classification target has a single class")]
    ConstantTarget,
    #[error("{n} rows is too few to split (need {min})")]
    TooFewRows { n: usize, min: usize },
    #[error("test fraction {0} must lie strictly between 0 and 0.5")]
    InvalidFraction(f64),
    #[error("matrix is already standardized")]
    AlreadyScaled,
    #[error("column list mismatch: expected [{expected}], found [{found}]")]
    ColumnMismatch { expected: String, found: String },
    #[error("no labelled rows")]
    EmptyRows,
    #[error("duplicate date in rows")]
    DuplicateDate,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for FeatureError {
    fn eq(&self, other: &Self) -> bool {
        use FeatureError::*;
        match (self, other) {
            (PriceCoverageGap(a), PriceCoverageGap(b)) => a == b,
            (ConstantTarget, ConstantTarget) | (AlreadyScaled, AlreadyScaled) | (EmptyRows, EmptyRows) | (DuplicateDate, DuplicateDate) => true,
            (TooFewRows { n: a, min: b }, TooFewRows { n: c, min: d }) => a == c && b == d,
            (InvalidFraction(a), InvalidFraction(b)) => a == b,
            (ColumnMismatch { expected: a, found: b }, ColumnMismatch { expected: c, found: d }) => a == c && b == d,
            (Parse { line: a, reason: b }, Parse { line: c, reason: d }) => a == c && b == d,
            (Io(a), Io(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}
