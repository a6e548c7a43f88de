//! Pipeline configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{Task, DEFAULT_TEST_FRACTION};
use crate::ingest::{FillPolicy, TweetSchema, Window};
use crate::mlcore::ParamValue;
use crate::models::{apply_grid_overrides, default_roster, ModelSpec};
use crate::nlp::language::{DEFAULT_ACCEPT_THRESHOLD, DEFAULT_STOPWORD_WEIGHT};
use crate::nlp::sentiment::DEFAULT_NEUTRAL_THRESHOLD;
use crate::nlp::{LanguageDetector, Lexicon, TextPipeline};
use crate::rng::DEFAULT_SEED;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{what} not found: {path}")]
    MissingPath { what: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSelection {
    #[default]
    Regression,
    Classification,
    Cluster,
}

impl TaskSelection {
    pub fn supervised(self) -> Option<Task> {
        match self {
            TaskSelection::Regression => Some(Task::Regression),
            TaskSelection::Classification => Some(Task::Classification),
            TaskSelection::Cluster => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskSelection::Regression => "regression",
            TaskSelection::Classification => "classification",
            TaskSelection::Cluster => "cluster",
        }
    }
}

impl std::str::FromStr for TaskSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "regression" => Ok(TaskSelection::Regression),
            "classification" => Ok(TaskSelection::Classification),
            "cluster" => Ok(TaskSelection::Cluster),
            _ => Err(format!("unknown task {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub tweets: PathBuf,
    pub prices: PathBuf,
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { tweets: "tweets.csv".into(), prices: "prices.csv".into(), out: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub schema: TweetSchema,
    pub window: Window,
    pub price_delimiter: char,
    pub fill: FillPolicy,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { schema: TweetSchema::default(), window: Window::default(), price_delimiter: ',', fill: FillPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlpConfig {
    pub language: String,
    /// Sentiment band half-width τ.
    pub neutral_threshold: f64,
    pub accept_threshold: f64,
    pub stopword_weight: f64,
}

impl Default for NlpConfig {
    fn default() -> Self {
        Self {
            language: "en".into(),
            neutral_threshold: DEFAULT_NEUTRAL_THRESHOLD,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
            stopword_weight: DEFAULT_STOPWORD_WEIGHT,
        }
    }
}

impl NlpConfig {
    pub fn text_pipeline(&self) -> TextPipeline {
        let detector = LanguageDetector::default().with_thresholds(self.accept_threshold, self.stopword_weight);
        TextPipeline::new(detector, Lexicon::bundled().clone(), self.neutral_threshold, &self.language)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub test_fraction: f64,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self { test_fraction: DEFAULT_TEST_FRACTION }
    }
}

pub type GridOverrides = BTreeMap<String, BTreeMap<String, Vec<ParamValue>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub cv_folds: usize,
    /// Per-model grid axes replacing the defaults, e.g. `[models.grids.ridge] lambda = [0.1, 1.0]`.
    pub grids: GridOverrides,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self { cv_folds: 5, grids: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub sample_cap: usize,
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k_min: 1, k_max: 10, n_init: 10, max_iter: 300, sample_cap: crate::cluster::DEFAULT_SAMPLE_CAP, min_pts: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub task: TaskSelection,
    /// `all` or one roster name.
    pub model: String,
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub workers: usize,
    pub paths: PathsConfig,
    pub ingest: IngestConfig,
    pub nlp: NlpConfig,
    pub features: FeaturesConfig,
    pub models: ModelsConfig,
    pub cluster: ClusterConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            task: TaskSelection::default(),
            model: "all".into(),
            workers: 1,
            paths: PathsConfig::default(),
            ingest: IngestConfig::default(),
            nlp: NlpConfig::default(),
            features: FeaturesConfig::default(),
            models: ModelsConfig::default(),
            cluster: ClusterConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical JSON form, ignoring settings that cannot
    /// change any artifact's content: worker count, task and model
    /// selection, and the output directory.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        for k in ["workers", "task", "model"] {
            obj.remove(k);
        }
        if let Some(p) = obj.get_mut("paths").and_then(|p| p.as_object_mut()) {
            p.remove("out");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks value ranges and model names. Paths are checked per stage.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let n = &self.nlp;
        if !(n.neutral_threshold > 0.0 && n.neutral_threshold < 1.0) {
            return bad(format!("nlp.neutral_threshold {} must lie in (0, 1)", n.neutral_threshold));
        }
        if !(n.accept_threshold > 0.0 && n.accept_threshold <= 1.0) {
            return bad(format!("nlp.accept_threshold {} must lie in (0, 1]", n.accept_threshold));
        }
        if !(0.0..=1.0).contains(&n.stopword_weight) {
            return bad(format!("nlp.stopword_weight {} must lie in [0, 1]", n.stopword_weight));
        }
        if !LanguageDetector::default().languages().contains(&n.language) {
            return bad(format!("nlp.language {:?} has no bundled profile", n.language));
        }
        let tf = self.features.test_fraction;
        if !(tf > 0.0 && tf < 0.5) {
            return bad(format!("features.test_fraction {tf} must lie in (0, 0.5)"));
        }
        if self.models.cv_folds < 2 {
            return bad(format!("models.cv_folds {} must be at least 2", self.models.cv_folds));
        }
        let w = &self.ingest.window;
        if w.start > w.end {
            return bad(format!("ingest.window start {} is after end {}", w.start, w.end));
        }
        if !self.ingest.price_delimiter.is_ascii() || !self.ingest.schema.delimiter.is_ascii() {
            return bad("delimiters must be ASCII characters".into());
        }
        let c = &self.cluster;
        if c.k_min == 0 || c.k_min > c.k_max {
            return bad(format!("cluster k range {}..={} is empty or starts at 0", c.k_min, c.k_max));
        }
        if c.n_init == 0 || c.max_iter == 0 || c.sample_cap < 2 || c.min_pts < 2 {
            return bad("cluster n_init, max_iter must be positive; sample_cap and min_pts at least 2".into());
        }
        let known: Vec<String> = [Task::Regression, Task::Classification].into_iter().flat_map(default_roster).map(|m| m.name).collect();
        for name in self.models.grids.keys() {
            if !known.contains(name) {
                return bad(format!("models.grids.{name}: unknown model"));
            }
        }
        if self.model != "all" && !known.contains(&self.model) {
            return bad(format!("unknown model {:?}", self.model));
        }
        Ok(())
    }

    pub fn require_path(what: &'static str, path: &Path) -> Result<(), ConfigError> {
        if path.exists() {
            Ok(())
        } else {
            Err(ConfigError::MissingPath { what, path: path.to_path_buf() })
        }
    }

    /// Models to train for `task`, with grid overrides and the model filter applied.
    pub fn roster(&self, task: Task) -> Result<Vec<ModelSpec>, ConfigError> {
        let mut r = default_roster(task);
        apply_grid_overrides(&mut r, &self.models.grids);
        if self.model != "all" {
            r.retain(|m| m.name == self.model);
            if r.is_empty() {
                return Err(ConfigError::Invalid(format!("model {:?} is not part of the {} roster", self.model, task.as_str())));
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.seed, 42);
        c.validate().unwrap();
    }

    #[test]
    fn parses_sections_and_grids() {
        let c = PipelineConfig::from_toml(
            r#"
            seed = 7
            task = "classification"
            [paths]
            tweets = "a.csv"
            [ingest.window]
            start = "2017-01-01"
            end = "2017-12-31"
            [ingest.schema]
            delimiter = ","
            [models.grids.cart]
            max_depth = [2, "none"]
            "#,
        )
        .unwrap();
        assert_eq!(c.task, TaskSelection::Classification);
        assert_eq!(c.ingest.schema.delimiter, ',');
        assert_eq!(c.ingest.schema.text, "text");
        let r = c.roster(Task::Classification).unwrap();
        let cart = r.iter().find(|m| m.name == "cart").unwrap();
        assert_eq!(cart.grid.combinations().len(), 2);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_values_rejected() {
        assert!(matches!(PipelineConfig::from_toml("sed = 1"), Err(ConfigError::Parse(_))));
        let mut c = PipelineConfig::default();
        c.features.test_fraction = 0.6;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.models.grids.insert("xgboost".into(), BTreeMap::new());
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.model = "svm".into();
        assert!(c.roster(Task::Regression).is_err());
        assert_eq!(c.roster(Task::Classification).unwrap().len(), 1);
    }

    #[test]
    fn hash_ignores_non_content_settings() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.workers = 8;
        b.task = TaskSelection::Cluster;
        b.paths.out = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 43;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
