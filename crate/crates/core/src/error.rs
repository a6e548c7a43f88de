use thiserror::Error;

/// Failures shared by every model-fitting routine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no training rows")]
    EmptyData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target has a single class; both 0 and 1 are required")]
    SingleClass,
    #[error("regularization strength must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("input matrix must be standardized before fitting this model")]
    NotStandardized,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("training diverged at epoch {epoch}: loss {loss:e} exceeds 1e6 x initial {initial:e}")]
    Divergence { epoch: usize, loss: f64, initial: f64 },
    #[error("every unit of hidden layer {layer} is dead after epoch {epoch}")]
    AllUnitsDead { layer: usize, epoch: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub(crate) fn check_binary(y: &[f64]) -> Result<(usize, usize), ModelError> {
    let mut pos = 0;
    for &v in y {
        if v == 1.0 {
            pos += 1;
        } else if v != 0.0 {
            return Err(ModelError::InvalidParam(format!("label {v} is not 0 or 1")));
        }
    }
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass);
    }
    Ok((neg, pos))
}

pub(crate) fn check_xy(rows: usize, y: &[f64]) -> Result<(), ModelError> {
    if rows == 0 {
        return Err(ModelError::EmptyData);
    }
    if rows != y.len() {
        return Err(ModelError::DimensionMismatch { expected: rows, got: y.len() });
    }
    Ok(())
}
