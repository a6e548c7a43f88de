//! Metrics, ROC analysis, folds and grid search shared by all models.

mod grid;
mod metrics;
mod roc;

use thiserror::Error;

use crate::error::ModelError;

pub use grid::{
    contiguous_folds, cross_validated_grid_search, fold_indices, format_params, param_f64, param_usize, CvRow, FoldScheme,
    GridSearchResult, Metric, ModelFamily, ParamGrid, ParamValue, Params, Predict, MIN_FOLD_ROWS,
};
pub use metrics::{classification_metrics, f1_score, regression_metrics, ClassificationMetrics, ConfusionCounts, RegressionMetrics};
pub use roc::{roc_curve_auc, RocCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no examples")]
    Empty,
    #[error("label {0} is not 0 or 1")]
    NonBinary(f64),
    #[error("score {0} is not a number")]
    NonFinite(f64),
    #[error("both classes are required")]
    SingleClass,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("{rows} rows cannot fill {k} folds of at least {} rows", MIN_FOLD_ROWS)]
    FoldTooSmall { rows: usize, k: usize },
    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    None,
    /// Each class weighted `n / (2 * n_class)`.
    Balanced,
}

impl ClassWeight {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassWeight::None => "none",
            ClassWeight::Balanced => "balanced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(ClassWeight::None),
            "balanced" => Some(ClassWeight::Balanced),
            _ => None,
        }
    }

    /// Per-sample weights for 0/1 labels.
    pub fn sample_weights(self, y: &[f64]) -> Vec<f64> {
        match self {
            ClassWeight::None => vec![1.0; y.len()],
            ClassWeight::Balanced => {
                let n = y.len() as f64;
                let pos = y.iter().filter(|&&v| v == 1.0).count() as f64;
                let (wp, wn) = (n / (2.0 * pos.max(1.0)), n / (2.0 * (n - pos).max(1.0)));
                y.iter().map(|&v| if v == 1.0 { wp } else { wn }).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_weights_equalize_class_mass() {
        let y = [1.0, 0.0, 0.0, 0.0];
        let w = ClassWeight::Balanced.sample_weights(&y);
        assert_eq!(w, vec![2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(ClassWeight::None.sample_weights(&y), vec![1.0; 4]);
    }
}
