//! Few-shot example pools and column-name-expansion datasets.
//!
//! A pool file is a JSON array of `{"input": ..., "output": ...}` objects.
//! Entries may also carry an `"id"` (defaults to `<file name>#<index>`) and a
//! `"language"` tag (`"en"` / `"de"`) which must agree with the pool language.
//!
//! A dataset file is a JSON array of
//! `{"table": ..., "columns": [...], "gold": {...} | null}` objects.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest pool the sampler can split into two disjoint samples of two.
pub const MIN_POOL_SIZE: usize = 4;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("pool has {found} examples, at least {MIN_POOL_SIZE} are required")]
    PoolTooSmall { found: usize },
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("table {table:?} lists column {column:?} more than once")]
    DuplicateColumn { table: String, column: String },
    #[error("table {0:?} has no gold expansions")]
    MissingGold(String),
    #[error("example {id:?} is tagged {found} but the pool language is {expected}")]
    LanguageMismatch {
        id: String,
        found: Language,
        expected: Language,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    English,
    #[serde(rename = "de")]
    German,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::German => "de",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One demonstration of the target task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub id: String,
    pub input_text: String,
    pub output_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePool {
    examples: Vec<ExamplePair>,
    language: Language,
}

impl ExamplePool {
    /// Validates ids, non-empty texts and the minimum size.
    pub fn new(examples: Vec<ExamplePair>, language: Language) -> Result<Self, PoolError> {
        let mut seen = HashSet::new();
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(PoolError::DuplicateId(ex.id.clone()));
            }
        }
        if examples.len() < MIN_POOL_SIZE {
            return Err(PoolError::PoolTooSmall {
                found: examples.len(),
            });
        }
        if let Some(ex) = examples
            .iter()
            .find(|e| e.input_text.trim().is_empty() || e.output_text.trim().is_empty())
        {
            return Err(PoolError::MalformedFile {
                path: PathBuf::new(),
                reason: format!("example {:?} has an empty input or output", ex.id),
            });
        }
        Ok(Self { examples, language })
    }

    pub fn examples(&self) -> &[ExamplePair] {
        &self.examples
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ExamplePair> {
        self.examples.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<Language>,
    input: String,
    output: String,
}

fn read(path: &Path) -> Result<String, PoolError> {
    fs::read_to_string(path).map_err(|source| PoolError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn malformed(path: &Path, reason: impl Into<String>) -> PoolError {
    PoolError::MalformedFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Loads and validates a pool file, preserving file order.
pub fn load_pool(path: impl AsRef<Path>, language: Language) -> Result<ExamplePool, PoolError> {
    let path = path.as_ref();
    let entries: Vec<PoolEntry> =
        serde_json::from_str(&read(path)?).map_err(|e| malformed(path, e.to_string()))?;
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut examples = Vec::with_capacity(entries.len());
    for (index, entry) in entries.into_iter().enumerate() {
        let id = entry.id.unwrap_or_else(|| format!("{source}#{index}"));
        if entry.input.trim().is_empty() || entry.output.trim().is_empty() {
            return Err(malformed(
                path,
                format!("example {id:?} has an empty input or output"),
            ));
        }
        if let Some(found) = entry.language.filter(|l| *l != language) {
            return Err(PoolError::LanguageMismatch {
                id,
                found,
                expected: language,
            });
        }
        examples.push(ExamplePair {
            id,
            input_text: entry.input,
            output_text: entry.output,
        });
    }
    ExamplePool::new(examples, language)
}

/// Writes a pool so that [`load_pool`] returns it unchanged.
pub fn save_pool(pool: &ExamplePool, path: impl AsRef<Path>) -> Result<(), PoolError> {
    let path = path.as_ref();
    let entries: Vec<PoolEntry> = pool
        .examples
        .iter()
        .map(|e| PoolEntry {
            id: Some(e.id.clone()),
            language: Some(pool.language),
            input: e.input_text.clone(),
            output: e.output_text.clone(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("pool entries serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| PoolError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A table with cryptic column names and, optionally, their gold expansions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CneTable {
    table_name: String,
    columns: Vec<String>,
    gold: Option<BTreeMap<String, String>>,
}

impl CneTable {
    pub fn new(
        table_name: impl Into<String>,
        columns: Vec<String>,
        gold: Option<BTreeMap<String, String>>,
    ) -> Result<Self, PoolError> {
        let table_name = table_name.into();
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(PoolError::DuplicateColumn {
                    table: table_name,
                    column: c.clone(),
                });
            }
        }
        if let Some(gold) = &gold {
            let keys: HashSet<&str> = gold.keys().map(String::as_str).collect();
            if keys != seen {
                return Err(PoolError::MalformedFile {
                    path: PathBuf::new(),
                    reason: format!("gold keys of table {table_name:?} differ from its columns"),
                });
            }
            if let Some((col, _)) = gold.iter().find(|(_, v)| v.trim().is_empty()) {
                return Err(PoolError::MalformedFile {
                    path: PathBuf::new(),
                    reason: format!("empty gold expansion for {table_name:?}.{col}"),
                });
            }
        }
        Ok(Self {
            table_name,
            columns,
            gold,
        })
    }

    pub fn table_name(&self) -> &str {
        &self.table_name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn gold(&self) -> Option<&BTreeMap<String, String>> {
        self.gold.as_ref()
    }

    /// Gold pairs in column order.
    pub fn gold_pairs(&self) -> Option<Vec<(&str, &str)>> {
        let gold = self.gold.as_ref()?;
        Some(
            self.columns
                .iter()
                .map(|c| (c.as_str(), gold[c].as_str()))
                .collect(),
        )
    }

    /// `{"table": "...", "columns": ["...", ...]}` on a single line.
    pub fn input_text(&self) -> String {
        let cols: Vec<String> = self.columns.iter().map(|c| quote(c)).collect();
        format!(
            "{{\"table\": {}, \"columns\": [{}]}}",
            quote(&self.table_name),
            cols.join(", ")
        )
    }

    /// `{"table": "...", "columns": {"col": "expansion", ...}}` on a single
    /// line, keys in column order.
    pub fn output_text(&self) -> Result<String, PoolError> {
        let pairs = self
            .gold_pairs()
            .ok_or_else(|| PoolError::MissingGold(self.table_name.clone()))?;
        Ok(render_expansions(&self.table_name, pairs))
    }
}

/// Formats an expansion map the same way gold outputs are formatted.
pub fn render_expansions<'a>(
    table_name: &str,
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> String {
    let entries: Vec<String> = pairs
        .into_iter()
        .map(|(c, e)| format!("{}: {}", quote(c), quote(e)))
        .collect();
    format!(
        "{{\"table\": {}, \"columns\": {{{}}}}}",
        quote(table_name),
        entries.join(", ")
    )
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Turns a gold-annotated table into a demonstration pair.
pub fn cne_to_example(table: &CneTable, id: impl Into<String>) -> Result<ExamplePair, PoolError> {
    Ok(ExamplePair {
        id: id.into(),
        input_text: table.input_text(),
        output_text: table.output_text()?,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TableEntry {
    table: String,
    columns: Vec<String>,
    #[serde(default)]
    gold: Option<BTreeMap<String, String>>,
}

/// Tables loaded from a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CneDataset {
    pub tables: Vec<CneTable>,
}

impl CneDataset {
    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }
}

pub fn load_cne_dataset(path: impl AsRef<Path>) -> Result<CneDataset, PoolError> {
    let path = path.as_ref();
    let entries: Vec<TableEntry> =
        serde_json::from_str(&read(path)?).map_err(|e| malformed(path, e.to_string()))?;
    let tables = entries
        .into_iter()
        .map(|e| {
            CneTable::new(e.table, e.columns, e.gold).map_err(|err| match err {
                PoolError::MalformedFile { reason, .. } => malformed(path, reason),
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CneDataset { tables })
}

pub fn save_cne_dataset(dataset: &CneDataset, path: impl AsRef<Path>) -> Result<(), PoolError> {
    let path = path.as_ref();
    let entries: Vec<TableEntry> = dataset
        .tables
        .iter()
        .map(|t| TableEntry {
            table: t.table_name.clone(),
            columns: t.columns.clone(),
            gold: t.gold.clone(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("tables serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| PoolError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds a pool with one demonstration per gold-annotated table.
pub fn pool_from_dataset(
    dataset: &CneDataset,
    source: &str,
    language: Language,
) -> Result<ExamplePool, PoolError> {
    let examples = dataset
        .tables
        .iter()
        .enumerate()
        .map(|(i, t)| cne_to_example(t, format!("{source}#{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    ExamplePool::new(examples, language)
}
