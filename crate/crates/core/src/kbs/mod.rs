//! Nearest neighbours, Gaussian naive Bayes and kernel SVM classifiers.

mod gnb;
mod knn;
mod svm;

pub use gnb::{fit_gaussian_nb, GnbModel, DEFAULT_VAR_SMOOTHING};
pub use knn::KnnIndex;
pub use svm::{fit_svm_rbf, rbf, rbf_kernel_matrix, smo, svm_dual_objective, SmoSolution, SvmModel, SvmParams};

use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::mlcore::{param_f64, param_usize, ModelFamily, ParamValue, Params};

#[derive(Debug, Clone, Copy)]
pub struct KnnFamily;

impl ModelFamily for KnnFamily {
    type Model = KnnIndex;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<KnnIndex, ModelError> {
        KnnIndex::new(x.clone(), y.to_vec(), param_usize(p, "k", 5)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GnbFamily;

impl ModelFamily for GnbFamily {
    type Model = GnbModel;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<GnbModel, ModelError> {
        fit_gaussian_nb(x, y, param_f64(p, "var_smoothing", DEFAULT_VAR_SMOOTHING)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvmFamily {
    pub seed: u64,
}

impl SvmFamily {
    pub fn params(&self, p: &Params) -> Result<SvmParams, ModelError> {
        let gamma = match p.get("gamma") {
            None => None,
            Some(ParamValue::Str(s)) if s == "auto" => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| ModelError::InvalidParam(format!("gamma={v}")))?),
        };
        Ok(SvmParams { c: param_f64(p, "c", 1.0)?, gamma, seed: self.seed, ..Default::default() })
    }
}

impl ModelFamily for SvmFamily {
    type Model = SvmModel;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<SvmModel, ModelError> {
        fit_svm_rbf(x, y, &self.params(p)?)
    }
}
