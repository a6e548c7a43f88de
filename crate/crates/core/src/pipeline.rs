//! Stage driver: ingest, features, train, evaluate, report and cluster.
//!
//! Every stage reads the artifacts of the previous one from the output
//! directory, checks their config hash and writes its own, so any stage can be
//! rerun on its own.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{self, ClusterError, KmeansParams};
use crate::config::{ConfigError, PipelineConfig, TaskSelection};
use crate::corpus::{CorpusAccumulator, CorpusAggregate, LanguageCounts};
use crate::error::ModelError;
use crate::features::{
    assemble_raw, chronological_split, feature_columns, join_prices_and_label, load_feature_store, save_feature_store, DesignMatrix,
    FeatureError, ScalerParams, Task, UserAggregate,
};
use crate::ingest::{load_price_series, CorpusStats, IngestError, ShardPlan, TweetStream};
use crate::linalg::Matrix;
use crate::mlcore::{
    classification_metrics, cross_validated_grid_search, regression_metrics, roc_curve_auc, ClassificationMetrics, FoldScheme, GridError,
    Metric, MetricsError, Params, Predict,
};
use crate::models::{grid_metric, ModelKind, RosterFamily};
use crate::persist::{PersistError, SavedModel};
use crate::report::{self, ReportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Features,
    Train,
    Evaluate,
    Report,
    Cluster,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Cluster => "cluster",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("model {name}: {source}")]
    InModel { name: String, source: Box<StageError> },
}

impl StageError {
    fn is_numerical(&self) -> bool {
        match self {
            StageError::Model(e) => matches!(e, ModelError::NumericalFailure(_) | ModelError::Divergence { .. } | ModelError::AllUnitsDead { .. }),
            StageError::Grid(GridError::Model(e)) => StageError::Model(e.clone()).is_numerical(),
            StageError::Grid(GridError::AllCellsFailed(_)) => true,
            StageError::InModel { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage: {source}")]
    Stage { stage: Stage, source: StageError },
}

impl PipelineError {
    /// 2 for configuration problems, 4 for numerical failures, 3 for
    /// everything else about the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { source, .. } if source.is_numerical() => 4,
            PipelineError::Stage { .. } => 3,
        }
    }
}

fn at<E: Into<StageError>>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, source: e.into() }
}

fn io_at(stage: Stage, path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Stage { stage, source: StageError::Io { path: path.to_path_buf(), source } }
}

fn artifact(stage: Stage, path: &Path, message: impl Into<String>) -> PipelineError {
    PipelineError::Stage { stage, source: StageError::Artifact { path: path.to_path_buf(), message: message.into() } }
}

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn daily_store(&self) -> PathBuf {
        self.root.join("ingest").join("daily.csv")
    }

    pub fn users(&self) -> PathBuf {
        self.root.join("ingest").join("users.csv")
    }

    pub fn corpus_summary(&self) -> PathBuf {
        self.root.join("ingest").join("corpus.json")
    }

    pub fn feature_store(&self) -> PathBuf {
        self.root.join("features").join("features.csv")
    }

    pub fn scaler(&self, task: Task) -> PathBuf {
        self.root.join("models").join(task.as_str()).join("scaler.txt")
    }

    pub fn model(&self, task: Task, name: &str) -> PathBuf {
        self.root.join("models").join(task.as_str()).join(format!("{name}.model"))
    }

    pub fn cv_table(&self, task: Task, name: &str) -> PathBuf {
        self.root.join("models").join(task.as_str()).join(format!("cv_{name}.csv"))
    }

    pub fn report_dir(&self, task: Task) -> PathBuf {
        self.root.join("reports").join(task.as_str())
    }

    pub fn report_json(&self, task: Task) -> PathBuf {
        self.report_dir(task).join("report.json")
    }

    pub fn cluster_dir(&self) -> PathBuf {
        self.root.join("cluster")
    }
}

fn write_file(stage: Stage, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_at(stage, dir))?;
    }
    fs::write(path, contents).map_err(io_at(stage, path))
}

fn read_file(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => artifact(stage, path, "missing; run the earlier stage first"),
        _ => io_at(stage, path)(e),
    })
}

fn check_hash(stage: Stage, path: &Path, found: &str, expected: &str) -> Result<(), PipelineError> {
    if found == expected {
        Ok(())
    } else {
        Err(artifact(stage, path, format!("written under config hash {found}, current config is {expected}; rerun the earlier stage")))
    }
}

/// Prepends `# config_hash=<hex>` to delimited output.
pub fn with_hash_line(hash: &str, body: &str) -> String {
    format!("# config_hash={hash}\n{body}")
}

fn split_hash_line<'a>(stage: Stage, path: &Path, text: &'a str) -> Result<(&'a str, &'a str), PipelineError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let hash = first.strip_prefix("# config_hash=").ok_or_else(|| artifact(stage, path, "missing config hash line"))?;
    Ok((hash, rest))
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub config_hash: String,
    pub stats: CorpusStats,
    pub languages: LanguageCounts,
    pub days: usize,
    pub first_day: Option<NaiveDate>,
    pub last_day: Option<NaiveDate>,
    pub users: usize,
}

/// Streams the corpus through the text pipeline. More than one worker splits
/// the file into that many shards; the merged result does not depend on the
/// shard count.
pub fn aggregate_tweet_file(cfg: &PipelineConfig) -> Result<(CorpusAggregate, CorpusStats), PipelineError> {
    let stage = Stage::Ingest;
    let path = &cfg.paths.tweets;
    PipelineConfig::require_path("tweet corpus", path)?;
    let nlp = cfg.nlp.text_pipeline();
    let schema = &cfg.ingest.schema;
    let window = cfg.ingest.window;
    let shards = cfg.workers.max(1);
    let consume = |stream: &mut dyn Iterator<Item = Result<crate::ingest::RawTweet, IngestError>>| -> Result<CorpusAccumulator, IngestError> {
        let mut acc = CorpusAccumulator::new();
        for t in stream {
            acc.add(&t?, &nlp);
        }
        Ok(acc)
    };
    let (acc, stats) = if shards == 1 {
        let mut stream = TweetStream::open(path, schema, window).map_err(at(stage))?;
        let acc = consume(&mut stream).map_err(at(stage))?;
        (acc, stream.stats())
    } else {
        crate::par::with_workers(cfg.workers, || -> Result<_, PipelineError> {
            let plan = ShardPlan::new(path, schema, shards).map_err(at(stage))?;
            let dups = plan.duplicate_ordinals(path).map_err(at(stage))?;
            let parts = crate::par::map_indexed(plan.ranges.len(), |s| -> Result<_, IngestError> {
                let mut stream = plan.stream(path, s, window, dups[s].clone())?;
                let acc = consume(&mut stream)?;
                Ok((acc, stream.stats()))
            });
            let mut acc = CorpusAccumulator::new();
            let mut stats = CorpusStats::default();
            for p in parts {
                let (a, s) = p.map_err(at(stage))?;
                acc.merge(a);
                stats += s;
            }
            Ok((acc, stats))
        })?
    };
    Ok((acc.finish(&cfg.nlp.language), stats))
}

pub fn users_csv(hash: &str, users: &[UserAggregate]) -> String {
    let mut s = String::from("username,tweet_count,likes_sum,replies_sum,retweets_sum\n");
    for u in users {
        s.push_str(&format!("{},{},{},{},{}\n", u.username, u.tweet_count, u.likes_sum, u.replies_sum, u.retweets_sum));
    }
    with_hash_line(hash, &s)
}

fn parse_users(stage: Stage, path: &Path, body: &str) -> Result<Vec<UserAggregate>, PipelineError> {
    let mut lines = body.lines();
    if lines.next() != Some("username,tweet_count,likes_sum,replies_sum,retweets_sum") {
        return Err(artifact(stage, path, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let bad = || artifact(stage, path, format!("line {}: malformed user row", i + 3));
            let c: Vec<&str> = l.rsplitn(5, ',').collect();
            if c.len() != 5 {
                return Err(bad());
            }
            let n = |s: &str| s.parse::<u64>().map_err(|_| bad());
            Ok(UserAggregate { username: c[4].to_string(), tweet_count: n(c[3])?, likes_sum: n(c[2])?, replies_sum: n(c[1])?, retweets_sum: n(c[0])? })
        })
        .collect()
}

pub fn run_ingest(cfg: &PipelineConfig) -> Result<CorpusSummary, PipelineError> {
    let stage = Stage::Ingest;
    let hash = cfg.config_hash();
    let layout = Layout::new(&cfg.paths.out);
    let (agg, stats) = aggregate_tweet_file(cfg)?;
    let summary = CorpusSummary {
        config_hash: hash.clone(),
        stats,
        languages: agg.languages.clone(),
        days: agg.daily.len(),
        first_day: agg.daily.first().map(|r| r.date),
        last_day: agg.daily.last().map(|r| r.date),
        users: agg.users.len(),
    };
    let store = layout.daily_store();
    if let Some(dir) = store.parent() {
        fs::create_dir_all(dir).map_err(io_at(stage, dir))?;
    }
    save_feature_store(&store, &agg.daily, &hash).map_err(at(stage))?;
    write_file(stage, &layout.users(), users_csv(&hash, &agg.users))?;
    write_file(stage, &layout.corpus_summary(), to_json(&summary))?;
    Ok(summary)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

fn load_corpus_summary(cfg: &PipelineConfig) -> Option<CorpusSummary> {
    let text = fs::read_to_string(Layout::new(&cfg.paths.out).corpus_summary()).ok()?;
    serde_json::from_str::<CorpusSummary>(&text).ok().filter(|s| s.config_hash == cfg.config_hash())
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Joins prices onto the day rows and writes the feature store.
pub fn run_features(cfg: &PipelineConfig) -> Result<usize, PipelineError> {
    let stage = Stage::Features;
    let hash = cfg.config_hash();
    let layout = Layout::new(&cfg.paths.out);
    let daily_path = layout.daily_store();
    read_file(stage, &daily_path)?;
    let (daily, found) = load_feature_store(&daily_path).map_err(at(stage))?;
    check_hash(stage, &daily_path, &found, &hash)?;
    PipelineConfig::require_path("price series", &cfg.paths.prices)?;
    let prices = load_price_series(&cfg.paths.prices, cfg.ingest.price_delimiter as u8, cfg.ingest.fill).map_err(at(stage))?;
    let rows = join_prices_and_label(daily, &prices).map_err(at(stage))?;
    let out = layout.feature_store();
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir).map_err(io_at(stage, dir))?;
    }
    save_feature_store(&out, &rows, &hash).map_err(at(stage))?;
    Ok(rows.len())
}

/// Chronological split of the feature store, scaled with train statistics.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: DesignMatrix,
    pub test: DesignMatrix,
    pub scaler: ScalerParams,
}

pub fn prepare_split(cfg: &PipelineConfig, task: Task, stage: Stage) -> Result<PreparedSplit, PipelineError> {
    let path = Layout::new(&cfg.paths.out).feature_store();
    read_file(stage, &path)?;
    let (rows, found) = load_feature_store(&path).map_err(at(stage))?;
    check_hash(stage, &path, &found, &cfg.config_hash())?;
    split_rows(&rows, task, cfg.features.test_fraction).map_err(at(stage))
}

pub fn split_rows(rows: &[crate::features::DailyFeatureRow], task: Task, test_fraction: f64) -> Result<PreparedSplit, FeatureError> {
    let all = assemble_raw(rows, task)?;
    let (mut train, mut test) = chronological_split(&all, test_fraction)?;
    let scaler = ScalerParams::fit(&train)?;
    scaler.apply(&mut train)?;
    scaler.apply(&mut test)?;
    Ok(PreparedSplit { train, test, scaler })
}

// ---------------------------------------------------------------------------
// Train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub name: String,
    pub best_params: Params,
    pub cv_score: f64,
}

/// Grid search with contiguous folds over the training rows, then a final
/// fit of the best cell. Writes one model file and one CV table per model.
pub fn run_train(cfg: &PipelineConfig, task: Task) -> Result<Vec<TrainedModel>, PipelineError> {
    let stage = Stage::Train;
    let hash = cfg.config_hash();
    let layout = Layout::new(&cfg.paths.out);
    let roster = cfg.roster(task)?;
    let split = prepare_split(cfg, task, stage)?;
    write_file(stage, &layout.scaler(task), with_hash_line(&hash, &split.scaler.to_text()))?;
    let mut out = Vec::new();
    for spec in roster {
        let family = RosterFamily { kind: spec.kind, task, seed: cfg.seed };
        let wrap = |e: GridError| PipelineError::Stage {
            stage,
            source: StageError::InModel { name: spec.name.clone(), source: Box::new(StageError::Grid(e)) },
        };
        let (result, model) = crate::par::with_workers(cfg.workers, || {
            cross_validated_grid_search(&family, &spec.grid, &split.train.x, &split.train.y, cfg.models.cv_folds, grid_metric(task), FoldScheme::Contiguous)
        })
        .map_err(wrap)?;
        let saved = SavedModel {
            name: spec.name.clone(),
            kind: spec.kind,
            task,
            config_hash: hash.clone(),
            columns: feature_columns().to_vec(),
            params: result.best_params.clone(),
            scaler: split.scaler.clone(),
            model,
        };
        write_file(stage, &layout.model(task, &spec.name), saved.to_text())?;
        write_file(stage, &layout.cv_table(task, &spec.name), with_hash_line(&hash, &result.to_csv()))?;
        out.push(TrainedModel { name: spec.name, best_params: result.best_params, cv_score: result.cv_table[result.best_index].mean_score });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub rows: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

impl SplitSummary {
    fn of(m: &DesignMatrix) -> Self {
        Self { rows: m.len(), first_date: *m.dates.iter().min().unwrap(), last_date: *m.dates.iter().max().unwrap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub kind: ModelKind,
    pub params: Params,
    pub cv_metric: Metric,
    pub cv_score: f64,
    pub mse: Option<f64>,
    pub classification: Option<ClassificationMetrics>,
    pub roc: Option<crate::mlcore::RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub task: Task,
    pub corpus: Option<CorpusSummary>,
    pub train: SplitSummary,
    pub test: SplitSummary,
    pub models: Vec<ModelReport>,
}

impl EvalReport {
    /// Checks that every metric lies in its valid range.
    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for m in &self.models {
            if let Some(mse) = m.mse {
                if !(mse >= 0.0 && mse.is_finite()) {
                    return Err(format!("{}: mse {mse}", m.name));
                }
            }
            if let Some(c) = &m.classification {
                if ![c.accuracy, c.precision, c.recall, c.f1].into_iter().all(unit) {
                    return Err(format!("{}: metric outside [0, 1]", m.name));
                }
                if c.counts.total() as usize != self.test.rows {
                    return Err(format!("{}: confusion counts do not sum to the test size", m.name));
                }
            }
            if let Some(r) = &m.roc {
                if !unit(r.auc) || r.points.first() != Some(&(0.0, 0.0)) || r.points.last() != Some(&(1.0, 1.0)) {
                    return Err(format!("{}: malformed ROC curve", m.name));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Scores every saved model of the roster on the held-out rows.
pub fn evaluate_models(cfg: &PipelineConfig, task: Task) -> Result<EvalReport, PipelineError> {
    let stage = Stage::Evaluate;
    let hash = cfg.config_hash();
    let layout = Layout::new(&cfg.paths.out);
    let split = prepare_split(cfg, task, stage)?;
    let mut models = Vec::new();
    for spec in cfg.roster(task)? {
        let path = layout.model(task, &spec.name);
        read_file(stage, &path)?;
        let saved = SavedModel::load(&path).map_err(at(stage))?;
        saved.check_config_hash(&hash).map_err(at(stage))?;
        saved.check_columns(&split.test.columns).map_err(at(stage))?;
        if saved.scaler != split.scaler {
            return Err(artifact(stage, &path, "scaler differs from the one fitted on the current training rows"));
        }
        let cv_path = layout.cv_table(task, &spec.name);
        let cv_text = read_file(stage, &cv_path)?;
        let (cv_hash, cv_body) = split_hash_line(stage, &cv_path, &cv_text)?;
        check_hash(stage, &cv_path, cv_hash, &hash)?;
        let cv_score = best_cv_score(cv_body).ok_or_else(|| artifact(stage, &cv_path, "no scored grid cell"))?;

        let x = &split.test.x;
        let y = &split.test.y;
        let pred = saved.model.predict(x);
        let mut report =
            ModelReport { name: spec.name.clone(), kind: spec.kind, params: saved.params.clone(), cv_metric: grid_metric(task), cv_score, mse: None, classification: None, roc: None };
        match task {
            Task::Regression => report.mse = Some(regression_metrics(y, &pred).map_err(at(stage))?.mse),
            Task::Classification => {
                report.classification = Some(classification_metrics(y, &pred).map_err(at(stage))?);
                report.roc = match roc_curve_auc(y, &saved.model.scores(x)) {
                    Ok(r) => Some(r),
                    Err(MetricsError::SingleClass) => None,
                    Err(e) => return Err(at(stage)(e)),
                };
            }
        }
        models.push(report);
    }
    let report = EvalReport {
        config_hash: hash,
        task,
        corpus: load_corpus_summary(cfg),
        train: SplitSummary::of(&split.train),
        test: SplitSummary::of(&split.test),
        models,
    };
    report.validate().map_err(|m| artifact(stage, &layout.report_json(task), m))?;
    Ok(report)
}

fn best_cv_score(csv: &str) -> Option<f64> {
    csv.lines()
        .skip(1)
        .filter_map(|l| {
            let cells: Vec<&str> = l.rsplitn(3, ',').collect();
            cells.get(1)?.parse::<f64>().ok()
        })
        .filter(|v| v.is_finite())
        .reduce(f64::max)
}

pub fn run_evaluate(cfg: &PipelineConfig, task: Task) -> Result<EvalReport, PipelineError> {
    let report = evaluate_models(cfg, task)?;
    write_file(Stage::Evaluate, &Layout::new(&cfg.paths.out).report_json(task), report.to_json())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

pub fn load_report(cfg: &PipelineConfig, task: Task) -> Result<EvalReport, PipelineError> {
    let stage = Stage::Report;
    let path = Layout::new(&cfg.paths.out).report_json(task);
    let text = read_file(stage, &path)?;
    let report = EvalReport::from_json(&text).map_err(|e| artifact(stage, &path, e.to_string()))?;
    check_hash(stage, &path, &report.config_hash, &cfg.config_hash())?;
    Ok(report)
}

pub fn run_report(cfg: &PipelineConfig, task: Task) -> Result<Vec<PathBuf>, PipelineError> {
    let report = load_report(cfg, task)?;
    let dir = Layout::new(&cfg.paths.out).report_dir(task);
    report::emit_reports(&report, &dir, report::Formats::all()).map_err(at(Stage::Report))
}

// ---------------------------------------------------------------------------
// Cluster
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub config_hash: String,
    pub users: usize,
    pub elbow_knee: usize,
    pub elbow_low_confidence: bool,
    pub kmeans_sizes: Vec<usize>,
    pub sample_rows: usize,
    pub hierarchical_sizes: Vec<usize>,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub dbscan_clusters: usize,
    pub dbscan_noise: usize,
}

/// Column-wise z-scores; constant columns are only centered.
pub fn standardize_columns(rows: &[[f64; 4]]) -> Matrix {
    let n = rows.len() as f64;
    let mut x = Matrix::from_rows(rows);
    for j in 0..4 {
        let col = x.column(j);
        let mu = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..x.nrows() {
            x.set(i, j, (x.get(i, j) - mu) / sd);
        }
    }
    x.into_standardized()
}

fn sizes<L: Copy + Into<i64>>(labels: &[L]) -> Vec<usize> {
    let mut counts: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
    for &l in labels {
        let l: i64 = l.into();
        if l >= 0 {
            *counts.entry(l).or_default() += 1;
        }
    }
    counts.into_values().collect()
}

pub fn run_cluster(cfg: &PipelineConfig) -> Result<ClusterSummary, PipelineError> {
    let stage = Stage::Cluster;
    let hash = cfg.config_hash();
    let layout = Layout::new(&cfg.paths.out);
    let users_path = layout.users();
    let text = read_file(stage, &users_path)?;
    let (found, body) = split_hash_line(stage, &users_path, &text)?;
    check_hash(stage, &users_path, found, &hash)?;
    let users = parse_users(stage, &users_path, body)?;
    if users.is_empty() {
        return Err(at(stage)(ClusterError::EmptyData));
    }
    let x = standardize_columns(&users.iter().map(UserAggregate::feature_vector).collect::<Vec<_>>());
    let c = &cfg.cluster;
    let params = KmeansParams { max_iter: c.max_iter, n_init: c.n_init, seed: cfg.seed, ..KmeansParams::default() };
    let k_to = c.k_max.min(x.nrows());
    let scan = crate::par::with_workers(cfg.workers, || cluster::elbow_scan(&x, c.k_min.min(k_to), k_to, &params)).map_err(at(stage))?;
    let km = crate::par::with_workers(cfg.workers, || cluster::fit_kmeans(&x, scan.knee, &params)).map_err(at(stage))?;

    let (sample, idx) = cluster::subsample(&x, c.sample_cap, cfg.seed);
    let dendrogram = crate::par::with_workers(cfg.workers, || cluster::fit_agglomerative(&sample, c.sample_cap)).map_err(at(stage))?;
    let hier = dendrogram.cut_k(scan.knee.min(sample.nrows())).map_err(at(stage))?;
    let k = (c.min_pts - 1).min(sample.nrows().saturating_sub(1)).max(1);
    let curve = cluster::k_distance_curve(&sample, k).map_err(at(stage))?;
    let eps = cluster::knee_eps(&curve).filter(|e| *e > 0.0).unwrap_or_else(|| curve.last().copied().unwrap_or(1.0).max(1e-9));
    let db = cluster::fit_dbscan(&sample, eps, c.min_pts, c.sample_cap).map_err(at(stage))?;

    let dir = layout.cluster_dir();
    write_file(stage, &dir.join("elbow.csv"), with_hash_line(&hash, &scan.to_csv()))?;
    write_file(stage, &dir.join("elbow.svg"), report::elbow_svg(&scan, &hash))?;
    write_file(stage, &dir.join("dendrogram.csv"), with_hash_line(&hash, &dendrogram.to_csv()))?;
    let mut kd = String::from("rank,distance\n");
    for (i, d) in curve.iter().enumerate() {
        kd.push_str(&format!("{i},{d}\n"));
    }
    write_file(stage, &dir.join("k_distance.csv"), with_hash_line(&hash, &kd))?;
    let mut sampled = vec![None; users.len()];
    for (s, &i) in idx.iter().enumerate() {
        sampled[i] = Some(s);
    }
    let mut labels = String::from("username,kmeans,hierarchical,dbscan\n");
    for (i, u) in users.iter().enumerate() {
        let (h, d) = sampled[i].map_or((String::new(), String::new()), |s| (hier[s].to_string(), db.labels[s].to_string()));
        labels.push_str(&format!("{},{},{h},{d}\n", u.username, km.labels[i]));
    }
    write_file(stage, &dir.join("user_clusters.csv"), with_hash_line(&hash, &labels))?;

    let summary = ClusterSummary {
        config_hash: hash,
        users: users.len(),
        elbow_knee: scan.knee,
        elbow_low_confidence: scan.low_confidence,
        kmeans_sizes: sizes(&km.labels.iter().map(|&l| l as i64).collect::<Vec<_>>()),
        sample_rows: sample.nrows(),
        hierarchical_sizes: sizes(&hier.iter().map(|&l| l as i64).collect::<Vec<_>>()),
        dbscan_eps: eps,
        dbscan_min_pts: c.min_pts,
        dbscan_clusters: db.n_clusters,
        dbscan_noise: db.n_noise(),
    };
    write_file(stage, &dir.join("summary.json"), to_json(&summary))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Whole pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineOutcome {
    Supervised(EvalReport),
    Cluster(ClusterSummary),
}

/// Runs every stage for the configured task.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    run_ingest(cfg)?;
    match cfg.task.supervised() {
        Some(task) => {
            run_features(cfg)?;
            run_train(cfg, task)?;
            let report = run_evaluate(cfg, task)?;
            run_report(cfg, task)?;
            Ok(PipelineOutcome::Supervised(report))
        }
        None => {
            debug_assert_eq!(cfg.task, TaskSelection::Cluster);
            Ok(PipelineOutcome::Cluster(run_cluster(cfg)?))
        }
    }
}
