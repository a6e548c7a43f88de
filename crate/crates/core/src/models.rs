//! The model roster: every family behind one enum, with default grids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::features::Task;
use crate::kbs::{GnbFamily, GnbModel, KnnFamily, KnnIndex, SvmFamily, SvmModel};
use crate::linalg::Matrix;
use crate::linear::{LinearFamily, LinearFamilySpec, LinearModel};
use crate::mlcore::{Metric, ModelFamily, ParamGrid, ParamValue, Params, Predict};
use crate::neural::{MlpFamily, MlpModel};
use crate::trees::{DecisionTree, ForestFamily, ForestModel, GbdtFamily, GbdtModel, TreeFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Ridge,
    Lasso,
    Logistic,
    Cart,
    Forest,
    Gbdt,
    Knn,
    Gnb,
    Svm,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Logistic => "logistic",
            ModelKind::Cart => "cart",
            ModelKind::Forest => "forest",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Knn => "knn",
            ModelKind::Gnb => "gnb",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Tree(DecisionTree),
    Forest(ForestModel),
    Gbdt(GbdtModel),
    Knn(KnnIndex),
    Gnb(GnbModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl FittedModel {
    /// Continuous scores for ranking: class-1 probability, vote share or
    /// decision value for classifiers, the prediction for regressors.
    pub fn scores(&self, x: &Matrix) -> Vec<f64> {
        match self {
            FittedModel::Linear(m) if m.family == LinearFamily::Logistic => m.predict_proba(x),
            FittedModel::Linear(m) => m.decision_function(x),
            FittedModel::Tree(m) => m.predict_values(x),
            FittedModel::Forest(m) => m.predict_values(x),
            FittedModel::Gbdt(m) => m.predict_proba(x),
            FittedModel::Knn(m) => m.scores(x).unwrap_or_else(|_| vec![f64::NAN; x.nrows()]),
            FittedModel::Gnb(m) => m.predict_proba(x),
            FittedModel::Svm(m) => m.decision_function(x),
            FittedModel::Mlp(m) => m.predict(x),
        }
    }

    /// Input width the model was fitted on, when it records one.
    pub fn n_features(&self) -> Option<usize> {
        match self {
            FittedModel::Linear(m) => Some(m.weights.len()),
            FittedModel::Tree(m) => Some(m.n_features),
            FittedModel::Forest(m) => m.trees.first().map(|t| t.n_features),
            FittedModel::Gbdt(m) => m.trees.first().map(|t| t.n_features),
            FittedModel::Knn(m) => Some(m.x.ncols()),
            FittedModel::Gnb(m) => Some(m.means[0].len()),
            FittedModel::Svm(m) => m.support.first().map(Vec::len),
            FittedModel::Mlp(m) => m.layers.first().copied(),
        }
    }
}

impl Predict for FittedModel {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        match self {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Tree(m) => m.predict(x),
            FittedModel::Forest(m) => m.predict(x),
            FittedModel::Gbdt(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::Gnb(m) => m.predict(x),
            FittedModel::Svm(m) => m.predict(x),
            FittedModel::Mlp(m) => m.predict(x),
        }
    }
}

/// One roster entry: a family plus a default grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub task: Task,
    pub grid: ParamGrid,
}

/// Grid-search adapter producing [`FittedModel`]s.
#[derive(Debug, Clone, Copy)]
pub struct RosterFamily {
    pub kind: ModelKind,
    pub task: Task,
    pub seed: u64,
}

impl ModelFamily for RosterFamily {
    type Model = FittedModel;

    fn fit(&self, p: &Params, x: &Matrix, y: &[f64]) -> Result<FittedModel, ModelError> {
        let classification = self.task == Task::Classification;
        let seed = self.seed;
        Ok(match self.kind {
            ModelKind::Ols => FittedModel::Linear(LinearFamilySpec(LinearFamily::Ols).fit(p, x, y)?),
            ModelKind::Ridge => FittedModel::Linear(LinearFamilySpec(LinearFamily::Ridge).fit(p, x, y)?),
            ModelKind::Lasso => FittedModel::Linear(LinearFamilySpec(LinearFamily::Lasso).fit(p, x, y)?),
            ModelKind::Logistic => FittedModel::Linear(LinearFamilySpec(LinearFamily::Logistic).fit(p, x, y)?),
            ModelKind::Cart => FittedModel::Tree(TreeFamily { classification, seed }.fit(p, x, y)?),
            ModelKind::Forest => FittedModel::Forest(ForestFamily { classification, seed }.fit(p, x, y)?),
            ModelKind::Gbdt => FittedModel::Gbdt(GbdtFamily { seed }.fit(p, x, y)?),
            ModelKind::Knn => FittedModel::Knn(KnnFamily.fit(p, x, y)?),
            ModelKind::Gnb => FittedModel::Gnb(GnbFamily.fit(p, x, y)?),
            ModelKind::Svm => FittedModel::Svm(SvmFamily { seed }.fit(p, x, y)?),
            ModelKind::Mlp => FittedModel::Mlp(MlpFamily { seed }.fit(p, x, y)?),
        })
    }
}

pub fn grid_metric(task: Task) -> Metric {
    match task {
        Task::Regression => Metric::NegMse,
        Task::Classification => Metric::Accuracy,
    }
}

fn f(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Float(x)).collect()
}

fn i(v: &[i64]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Int(x)).collect()
}

fn s(v: &[&str]) -> Vec<ParamValue> {
    v.iter().map(|&x| ParamValue::Str(x.to_string())).collect()
}

fn depths() -> Vec<ParamValue> {
    vec![ParamValue::Int(3), ParamValue::Int(5), ParamValue::Str("none".into())]
}

fn spec(name: &str, kind: ModelKind, task: Task, grid: ParamGrid) -> ModelSpec {
    ModelSpec { name: name.to_string(), kind, task, grid }
}

/// Default roster for a task, in report order.
pub fn default_roster(task: Task) -> Vec<ModelSpec> {
    use ModelKind::*;
    let forest = ParamGrid::new().axis("n_estimators", i(&[100])).axis("max_depth", vec![ParamValue::Int(6), ParamValue::Str("none".into())]).axis("max_features", s(&["sqrt"]));
    match task {
        Task::Regression => vec![
            spec("ols", Ols, task, ParamGrid::new()),
            spec("ridge", Ridge, task, ParamGrid::new().axis("lambda", f(&[0.01, 0.1, 1.0, 10.0, 100.0]))),
            spec("lasso", Lasso, task, ParamGrid::new().axis("lambda", f(&[0.1, 1.0, 10.0, 100.0]))),
            spec("cart", Cart, task, ParamGrid::new().axis("max_depth", depths())),
            spec("forest", Forest, task, forest),
            spec("mlp", Mlp, task, ParamGrid::new().axis("hidden", s(&["32-16"])).axis("lr", f(&[0.01])).axis("epochs", i(&[200])).axis("batch_size", i(&[32]))),
        ],
        Task::Classification => vec![
            spec("logistic", Logistic, task, ParamGrid::new().axis("lambda", f(&[0.001, 0.01, 0.1, 1.0]))),
            spec("knn", Knn, task, ParamGrid::new().axis("k", i(&[3, 5, 7, 11, 15]))),
            spec("gnb", Gnb, task, ParamGrid::new().axis("var_smoothing", f(&[1e-9]))),
            spec("svm", Svm, task, ParamGrid::new().axis("c", f(&[0.1, 1.0, 10.0]))),
            spec("cart", Cart, task, ParamGrid::new().axis("max_depth", depths())),
            spec("forest", Forest, task, forest),
            spec("gbdt_shallow", Gbdt, task, ParamGrid::new().axis("n_rounds", i(&[200])).axis("max_depth", i(&[2])).axis("learning_rate", f(&[0.05]))),
            spec("gbdt_deep", Gbdt, task, ParamGrid::new().axis("n_rounds", i(&[50])).axis("max_depth", i(&[6])).axis("learning_rate", f(&[0.1]))),
        ],
    }
}

/// Replaces grid axes of named roster entries; other axes stay as they are.
pub fn apply_grid_overrides(roster: &mut [ModelSpec], overrides: &BTreeMap<String, BTreeMap<String, Vec<ParamValue>>>) {
    for m in roster.iter_mut() {
        if let Some(axes) = overrides.get(&m.name) {
            for (axis, values) in axes {
                match m.grid.axes.iter_mut().find(|(name, _)| name == axis) {
                    Some((_, v)) => *v = values.clone(),
                    None => m.grid.axes.push((axis.clone(), values.clone())),
                }
            }
        }
    }
}
