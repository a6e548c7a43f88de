//! Versioned text format for fitted models.
//!
//! ```text
//! tweetcast-model v1
//! name=ridge
//! kind=ridge
//! task=regression
//! config_hash=<hex>
//! columns=close,prev_close,...
//! params={"lambda":1.0}
//! --- scaler
//! format=scaler/1
//! ...
//! --- model
//! {"kind":"linear","model":{...}}
//! ```

use std::path::Path;

use thiserror::Error;

use crate::features::{ScalerParams, Task};
use crate::mlcore::Params;
use crate::models::{FittedModel, ModelKind};

pub const MODEL_MAGIC: &str = "tweetcast-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

const SCALER_MARK: &str = "--- scaler";
const MODEL_MARK: &str = "--- model";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("model file version {found} is not supported (expected v{expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("column list mismatch: expected [{expected}], found [{found}]")]
    ColumnListMismatch { expected: String, found: String },
    #[error("config hash mismatch: expected {expected}, found {found}")]
    ConfigHashMismatch { expected: String, found: String },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fitted model together with everything needed to score new rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub name: String,
    pub kind: ModelKind,
    pub task: Task,
    pub config_hash: String,
    pub columns: Vec<String>,
    pub params: Params,
    pub scaler: ScalerParams,
    pub model: FittedModel,
}

impl SavedModel {
    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_MAGIC} v{MODEL_FORMAT_VERSION}\n");
        s.push_str(&format!("name={}\n", self.name));
        s.push_str(&format!("kind={}\n", self.kind.as_str()));
        s.push_str(&format!("task={}\n", self.task.as_str()));
        s.push_str(&format!("config_hash={}\n", self.config_hash));
        s.push_str(&format!("columns={}\n", self.columns.join(",")));
        s.push_str(&format!("params={}\n", serde_json::to_string(&self.params).expect("params serialize")));
        s.push_str(SCALER_MARK);
        s.push('\n');
        s.push_str(&self.scaler.to_text());
        s.push_str(MODEL_MARK);
        s.push('\n');
        s.push_str(&serde_json::to_string(&self.model).expect("model serialize"));
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, PersistError> {
        let corrupt = |m: &str| PersistError::CorruptFile(m.to_string());
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| corrupt("empty file"))?;
        let version = first
            .strip_prefix(MODEL_MAGIC)
            .and_then(|r| r.strip_prefix(" v"))
            .ok_or_else(|| corrupt("missing header line"))?;
        if version != MODEL_FORMAT_VERSION.to_string() {
            return Err(PersistError::VersionMismatch { found: version.to_string(), expected: MODEL_FORMAT_VERSION });
        }
        let mut field = |key: &str| -> Result<String, PersistError> {
            let line = lines.next().ok_or_else(|| corrupt(&format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| corrupt(&format!("expected {key}=..., found {line:?}")))
        };
        let name = field("name")?;
        let kind_s = field("kind")?;
        let kind: ModelKind = serde_json::from_value(serde_json::Value::String(kind_s.clone())).map_err(|_| corrupt(&format!("unknown kind {kind_s}")))?;
        let task: Task = field("task")?.parse().map_err(|e: String| corrupt(&e))?;
        let config_hash = field("config_hash")?;
        let columns: Vec<String> = field("columns")?.split(',').map(String::from).collect();
        let params: Params = serde_json::from_str(&field("params")?).map_err(|e| corrupt(&format!("params: {e}")))?;
        if lines.next() != Some(SCALER_MARK) {
            return Err(corrupt("missing scaler section"));
        }
        let mut scaler_text = String::new();
        let mut found_model = false;
        for l in lines.by_ref() {
            if l == MODEL_MARK {
                found_model = true;
                break;
            }
            scaler_text.push_str(l);
            scaler_text.push('\n');
        }
        if !found_model {
            return Err(corrupt("missing model section"));
        }
        let scaler = ScalerParams::from_text(&scaler_text).map_err(|e| corrupt(&format!("scaler: {e}")))?;
        let body: String = lines.collect::<Vec<_>>().join("\n");
        let model: FittedModel = serde_json::from_str(&body).map_err(|e| corrupt(&format!("model: {e}")))?;
        if scaler.columns != columns {
            return Err(PersistError::ColumnListMismatch { expected: columns.join(","), found: scaler.columns.join(",") });
        }
        if model.n_features().is_some_and(|d| d != columns.len()) {
            return Err(corrupt("model width differs from column count"));
        }
        Ok(Self { name, kind, task, config_hash, columns, params, scaler, model })
    }

    /// Rejects files fitted on a different column list.
    pub fn check_columns(&self, expected: &[String]) -> Result<(), PersistError> {
        if self.columns != expected {
            return Err(PersistError::ColumnListMismatch { expected: expected.join(","), found: self.columns.join(",") });
        }
        Ok(())
    }

    pub fn check_config_hash(&self, expected: &str) -> Result<(), PersistError> {
        if self.config_hash != expected {
            return Err(PersistError::ConfigHashMismatch { expected: expected.to_string(), found: self.config_hash.clone() });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
