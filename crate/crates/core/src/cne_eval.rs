//! Column name expansion accuracy.
//!
//! A predicted expansion counts as correct when its Jaro-Winkler similarity
//! to the gold expansion is at least the match threshold (0.85 by default).
//! Accuracy is micro-averaged over columns; a column the model left out is
//! scored against an empty prediction and therefore never matches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::example_pool::{CneTable, ExamplePair};
use crate::llm_backend::{fan_out, BackendError, GenerationConfig, LlmBackend};
use crate::meta_prompt::instantiate;
use crate::similarity::{jaro_winkler, SimilarityParams};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.85;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("match threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("table {0:?} has no gold expansions")]
    NoGold(String),
    #[error("dataset contains no columns to evaluate")]
    EmptyDataset,
    #[error("no JSON object with a \"columns\" map in model output")]
    Unparseable,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lowercase: bool,
    pub collapse_whitespace: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            lowercase: true,
            collapse_whitespace: true,
        }
    }
}

impl Normalization {
    pub const NONE: Normalization = Normalization {
        lowercase: false,
        collapse_whitespace: false,
    };

    pub fn apply(&self, s: &str) -> String {
        let s = if self.collapse_whitespace {
            s.split_whitespace().collect::<Vec<_>>().join(" ")
        } else {
            s.to_string()
        };
        if self.lowercase {
            s.to_lowercase()
        } else {
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub match_threshold: f64,
    pub normalize: Normalization,
    pub similarity: SimilarityParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            normalize: Normalization::default(),
            similarity: SimilarityParams::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.match_threshold > 0.0 && self.match_threshold <= 1.0 {
            Ok(())
        } else {
            Err(EvalError::InvalidThreshold(self.match_threshold))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnResult {
    pub column: String,
    pub gold: String,
    pub predicted: String,
    pub similarity: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub table_name: String,
    pub parsed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub per_column: Vec<ColumnResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub match_threshold: f64,
    pub per_table: Vec<TableResult>,
    pub total_columns: usize,
    pub matched_columns: usize,
    pub accuracy: f64,
    pub unparsed_tables: usize,
}

impl EvalReport {
    /// Accuracy as a percentage with two decimals, e.g. `"51.89"`.
    pub fn accuracy_percent(&self) -> String {
        format!("{:.2}", self.accuracy * 100.0)
    }

    /// Scores raw model outputs, one per table (`Err` holds a backend
    /// failure message). Lets a recorded run be re-scored without a model.
    pub fn from_outputs(
        tables: &[CneTable],
        outputs: &[Result<String, String>],
        config: &EvalConfig,
    ) -> Result<Self, EvalError> {
        config.validate()?;
        assert_eq!(tables.len(), outputs.len(), "one output per table");
        let mut per_table = Vec::with_capacity(tables.len());
        for (table, output) in tables.iter().zip(outputs) {
            let gold = table
                .gold_pairs()
                .ok_or_else(|| EvalError::NoGold(table.table_name().to_string()))?;
            let (predicted, error) = match output {
                Ok(raw) => match parse_prediction(raw, table) {
                    Ok(map) => (Some(map), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                Err(msg) => (None, Some(msg.clone())),
            };
            let per_column = gold
                .iter()
                .map(|&(column, gold)| {
                    let predicted = predicted
                        .as_ref()
                        .and_then(|m| m.get(column))
                        .cloned()
                        .unwrap_or_default();
                    let (similarity, matched) = score_column(&predicted, gold, config);
                    ColumnResult {
                        column: column.to_string(),
                        gold: gold.to_string(),
                        predicted,
                        similarity,
                        matched,
                    }
                })
                .collect();
            per_table.push(TableResult {
                table_name: table.table_name().to_string(),
                parsed: predicted.is_some(),
                error,
                per_column,
            });
        }

        let total_columns: usize = per_table.iter().map(|t| t.per_column.len()).sum();
        if total_columns == 0 {
            return Err(EvalError::EmptyDataset);
        }
        let matched_columns = per_table
            .iter()
            .flat_map(|t| &t.per_column)
            .filter(|c| c.matched)
            .count();
        Ok(Self {
            match_threshold: config.match_threshold,
            unparsed_tables: per_table.iter().filter(|t| !t.parsed).count(),
            per_table,
            total_columns,
            matched_columns,
            accuracy: matched_columns as f64 / total_columns as f64,
        })
    }

    /// Plain-text summary laid out as system / dataset / accuracy.
    pub fn summary(&self, system: &str, dataset: &str) -> String {
        let acc = self.accuracy_percent();
        let w_sys = system.chars().count().max("System".len());
        let w_ds = dataset.chars().count().max("Dataset".len());
        let w_acc = acc.len().max("Accuracy".len());
        let mut out = String::new();
        out.push_str(&format!(
            "{:<w_sys$} | {:<w_ds$} | {:>w_acc$}\n",
            "System", "Dataset", "Accuracy"
        ));
        out.push_str(&format!(
            "{}-+-{}-+-{}\n",
            "-".repeat(w_sys),
            "-".repeat(w_ds),
            "-".repeat(w_acc)
        ));
        out.push_str(&format!(
            "{system:<w_sys$} | {dataset:<w_ds$} | {acc:>w_acc$}\n"
        ));
        out.push_str(&format!(
            "\nmatched {} of {} columns (Jaro-Winkler >= {}), unparsed tables: {}\n",
            self.matched_columns, self.total_columns, self.match_threshold, self.unparsed_tables
        ));
        out
    }
}

/// Normalized Jaro-Winkler similarity and whether it clears the threshold.
pub fn score_column(predicted: &str, gold: &str, config: &EvalConfig) -> (f64, bool) {
    let p = config.normalize.apply(predicted);
    let g = config.normalize.apply(gold);
    let similarity = jaro_winkler(&p, &g, &config.similarity);
    (similarity, similarity >= config.match_threshold)
}

/// Extracts the expansions from the first JSON object in `raw` that carries a
/// `"columns"` object. Every table column is present in the result; columns
/// the model omitted map to `""`.
pub fn parse_prediction(
    raw: &str,
    table: &CneTable,
) -> Result<BTreeMap<String, String>, EvalError> {
    let columns = first_columns_object(raw).ok_or(EvalError::Unparseable)?;
    Ok(table
        .columns()
        .iter()
        .map(|col| {
            let value = columns.get(col).or_else(|| {
                columns
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(col))
                    .map(|(_, v)| v)
            });
            let text = match value {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Null) | None => String::new(),
                Some(other) => other.to_string(),
            };
            (col.clone(), text)
        })
        .collect())
}

fn first_columns_object(raw: &str) -> Option<serde_json::Map<String, Value>> {
    raw.char_indices()
        .filter(|&(_, c)| c == '{')
        .find_map(|(start, _)| {
            let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
            match stream.next()? {
                Ok(Value::Object(mut obj)) => match obj.remove("columns") {
                    Some(Value::Object(cols)) => Some(cols),
                    _ => None,
                },
                _ => None,
            }
        })
}

/// Runs `instruction` over every table and scores the predictions.
///
/// Backend failures other than authentication are recorded on the table and
/// count as unparsed; an authentication failure aborts the run.
pub fn evaluate(
    tables: &[CneTable],
    backend: &dyn LlmBackend,
    instruction: &str,
    demonstrations: &[&ExamplePair],
    generation: &GenerationConfig,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    if let Some(t) = tables.iter().find(|t| t.gold().is_none()) {
        return Err(EvalError::NoGold(t.table_name().to_string()));
    }
    if tables.iter().all(|t| t.columns().is_empty()) {
        return Err(EvalError::EmptyDataset);
    }
    let results = fan_out(tables, generation.max_in_flight, |table| {
        let prompt = instantiate(instruction, demonstrations, &table.input_text());
        backend.infer(&prompt, generation)
    });
    let mut outputs = Vec::with_capacity(results.len());
    for r in results {
        outputs.push(match r {
            Ok(text) => Ok(text),
            Err(e @ BackendError::AuthError(_)) => return Err(e.into()),
            Err(e) => Err(e.to_string()),
        });
    }
    EvalReport::from_outputs(tables, &outputs, config)
}
