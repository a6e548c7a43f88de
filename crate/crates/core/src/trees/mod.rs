//! CART trees, random forests and gradient-boosted trees.

mod cart;
mod forest;
mod gbdt;

pub use cart::{fit_cart, fit_cart_weighted, Criterion, DecisionTree, MaxFeatures, Split, TreeNode, TreeParams};
pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use gbdt::{fit_gbdt, GbdtModel, GbdtParams};

use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::mlcore::{param_f64, param_usize, ClassWeight, ModelFamily, ParamValue, Params};

fn param_str<'a>(p: &'a Params, name: &str) -> Result<Option<&'a str>, ModelError> {
    match p.get(name) {
        None => Ok(None),
        Some(ParamValue::Str(s)) => Ok(Some(s)),
        Some(v) => Err(ModelError::InvalidParam(format!("{name}={v} is not a string"))),
    }
}

/// `max_depth` as a non-negative integer, or the string `none` for unlimited.
fn param_depth(p: &Params, default: Option<usize>) -> Result<Option<usize>, ModelError> {
    match p.get("max_depth") {
        None => Ok(default),
        Some(ParamValue::Str(s)) if s == "none" => Ok(None),
        Some(v) => v.as_usize().map(Some).ok_or_else(|| ModelError::InvalidParam(format!("max_depth={v}"))),
    }
}

fn criterion(p: &Params, default: Criterion) -> Result<Criterion, ModelError> {
    param_str(p, "criterion")?.map_or(Ok(default), |s| Criterion::parse(s).ok_or_else(|| ModelError::InvalidParam(format!("criterion={s}"))))
}

fn max_features(p: &Params) -> Result<MaxFeatures, ModelError> {
    match p.get("max_features") {
        None => Ok(MaxFeatures::All),
        Some(ParamValue::Int(i)) if *i > 0 => Ok(MaxFeatures::Count(*i as usize)),
        Some(ParamValue::Str(s)) => MaxFeatures::parse(s).ok_or_else(|| ModelError::InvalidParam(format!("max_features={s}"))),
        Some(v) => Err(ModelError::InvalidParam(format!("max_features={v}"))),
    }
}

fn class_weight(p: &Params) -> Result<ClassWeight, ModelError> {
    param_str(p, "class_weight")?.map_or(Ok(ClassWeight::None), |s| ClassWeight::parse(s).ok_or_else(|| ModelError::InvalidParam(format!("class_weight={s}"))))
}

/// Grid-search adapter for single trees.
#[derive(Debug, Clone, Copy)]
pub struct TreeFamily {
    pub classification: bool,
    pub seed: u64,
}

impl ModelFamily for TreeFamily {
    type Model = DecisionTree;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<DecisionTree, ModelError> {
        let tp = TreeParams {
            criterion: criterion(p, if self.classification { Criterion::Gini } else { Criterion::Variance })?,
            max_depth: param_depth(p, None)?,
            min_samples_split: param_usize(p, "min_samples_split", 2)?,
            max_features: max_features(p)?,
            seed: self.seed,
        };
        fit_cart(x, y, &tp)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestFamily {
    pub classification: bool,
    pub seed: u64,
}

impl ForestFamily {
    pub fn params(&self, p: &Params) -> Result<ForestParams, ModelError> {
        Ok(ForestParams {
            n_estimators: param_usize(p, "n_estimators", 100)?,
            criterion: criterion(p, if self.classification { Criterion::Gini } else { Criterion::Variance })?,
            max_depth: param_depth(p, None)?,
            min_samples_split: param_usize(p, "min_samples_split", 2)?,
            max_features: max_features(p)?,
            class_weight: class_weight(p)?,
            bootstrap: true,
            oob_score: false,
            seed: self.seed,
        })
    }
}

impl ModelFamily for ForestFamily {
    type Model = ForestModel;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<ForestModel, ModelError> {
        fit_random_forest(x, y, &self.params(p)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GbdtFamily {
    pub seed: u64,
}

impl GbdtFamily {
    pub fn params(&self, p: &Params) -> Result<GbdtParams, ModelError> {
        Ok(GbdtParams {
            n_rounds: param_usize(p, "n_rounds", 100)?,
            learning_rate: param_f64(p, "learning_rate", 0.1)?,
            max_depth: param_usize(p, "max_depth", 3)?,
            min_samples_split: param_usize(p, "min_samples_split", 2)?,
            seed: self.seed,
        })
    }
}

impl ModelFamily for GbdtFamily {
    type Model = GbdtModel;
    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<GbdtModel, ModelError> {
        fit_gbdt(x, y, &self.params(p)?)
    }
}
