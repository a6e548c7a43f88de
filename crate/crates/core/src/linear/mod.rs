//! Least squares, ridge, lasso and logistic regression, all with an
//! unpenalized intercept.

mod lasso;
mod logistic;
mod ols;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::{dot, Matrix};
use crate::mlcore::{param_f64, ClassWeight, ModelFamily, ParamValue, Params, Predict};

pub use lasso::{fit_lasso, lasso_objective, LassoOptions};
pub use logistic::{fit_logistic, logistic_objective, sigmoid, LogisticOptions};
pub use ols::{fit_ols, fit_ridge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearFamily {
    Ols,
    Ridge,
    Lasso,
    Logistic,
}

impl LinearFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            LinearFamily::Ols => "ols",
            LinearFamily::Ridge => "ridge",
            LinearFamily::Lasso => "lasso",
            LinearFamily::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// The normal equations needed a diagonal jitter to factor.
    pub jittered: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each sweep or step (iterative solvers only).
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub family: LinearFamily,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub hyperparams: Params,
    pub diagnostics: FitDiagnostics,
}

impl LinearModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }

    pub fn decision_function(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| self.decision(r)).collect()
    }

    /// σ(w·x + b); only meaningful for the logistic family.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| sigmoid(self.decision(r))).collect()
    }
}

impl Predict for LinearModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        match self.family {
            LinearFamily::Logistic => self.predict_proba(x).into_iter().map(|p| f64::from(u8::from(p >= 0.5))).collect(),
            _ => self.decision_function(x),
        }
    }
}

pub(crate) fn check_finite(x: &Matrix, y: &[f64]) -> Result<(), ModelError> {
    crate::error::check_xy(x.nrows(), y)?;
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::NumericalFailure("non-finite input".into()));
    }
    Ok(())
}

/// Grid-search adapter; reads `lambda` and, for logistic, `class_weight`.
#[derive(Debug, Clone, Copy)]
pub struct LinearFamilySpec(pub LinearFamily);

impl ModelFamily for LinearFamilySpec {
    type Model = LinearModel;

    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<LinearModel, ModelError> {
        let lambda = param_f64(p, "lambda", 1.0)?;
        match self.0 {
            LinearFamily::Ols => fit_ols(x, y),
            LinearFamily::Ridge => fit_ridge(x, y, lambda),
            LinearFamily::Lasso => fit_lasso(x, y, lambda, LassoOptions::default()),
            LinearFamily::Logistic => {
                let cw = match p.get("class_weight") {
                    None => ClassWeight::None,
                    Some(ParamValue::Str(s)) => ClassWeight::parse(s).ok_or_else(|| ModelError::InvalidParam(format!("class_weight={s}")))?,
                    Some(v) => return Err(ModelError::InvalidParam(format!("class_weight={v}"))),
                };
                fit_logistic(x, y, lambda, cw, LogisticOptions::default())
            }
        }
    }
}
