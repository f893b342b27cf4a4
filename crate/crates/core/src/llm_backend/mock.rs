//! Deterministic offline backend.
//!
//! Completion `i` for a prompt is assembled from fixed phrase banks, choosing
//! each piece from `SHA-256(seed || SHA-256(prompt) || i)`. The output depends
//! on nothing else, so it is identical across processes and platforms.
//!
//! Inference echoes gold expansions for tables the mock was primed with: when
//! the last `Input:` line of a task prompt is the serialized input of a primed
//! table, the table's serialized gold output is returned.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{check_request, BackendError, CompletionBatch, GenerationConfig, LlmBackend, Usage};
use crate::digest::sha256_hex;
use crate::example_pool::CneTable;

const EN_VERBS: &[&str] = &["expand", "expand", "expand", "rewrite", "spell out"];
const EN_OBJECTS: &[&str] = &[
    "the abbreviated column names",
    "the abbreviated column names",
    "the cryptic column names",
    "each abbreviated column name",
];
const EN_TAILS: &[&str] = &[
    " into their full names",
    " into full descriptive names",
    " in each table into their full names",
    " into human-readable names based on the table name",
];
const EN_VERBOSE: &str = "take the JSON object describing a database table and, for every column \
listed, work out what the abbreviation most likely stands for given the table name and the other \
columns, then return a JSON object that maps each original column name to its expanded form";
const EN_CHATTER: &str = "\n\nThe outputs above show that each short column name was replaced \
by its long form.";

const DE_VERBS: &[&str] = &["Erweitere", "Erweitere", "Expandiere", "Schreibe"];
const DE_OBJECTS: &[&str] = &[
    "die abgekürzten Spaltennamen",
    "die abgekürzten Spaltennamen",
    "die kryptischen Spaltennamen",
    "jeden abgekürzten Spaltennamen",
];
const DE_TAILS: &[&str] = &[
    " in vollständige Bezeichnungen",
    " in ausgeschriebene deutsche Bezeichnungen",
    " anhand des Tabellennamens in ihre vollständige Form",
    " in verständliche Bezeichnungen",
];
const DE_VERBOSE: &str = "Nimm das JSON-Objekt einer Datenbanktabelle, bestimme für jede \
aufgeführte Spalte anhand des Tabellennamens und der übrigen Spalten die wahrscheinlichste \
Langform und gib ein JSON-Objekt zurück, das jedem Spaltennamen seine Langform zuordnet.";
const DE_CHATTER: &str = "\n\nDie Ausgaben zeigen die ausgeschriebenen Namen.";

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    seed: u64,
    gold_by_input: HashMap<String, String>,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            gold_by_input: HashMap::new(),
        }
    }

    /// Registers tables whose gold output is echoed by [`LlmBackend::infer`].
    /// Tables without gold are ignored.
    pub fn primed_with<'a>(mut self, tables: impl IntoIterator<Item = &'a CneTable>) -> Self {
        for t in tables {
            if let Ok(out) = t.output_text() {
                self.gold_by_input.insert(t.input_text(), out);
            }
        }
        self
    }

    fn completion(&self, prompt: &str, index: usize) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(Sha256::digest(prompt.as_bytes()));
        h.update((index as u64).to_le_bytes());
        let bytes = h.finalize();
        let pick = |bank: &[&'static str], b: u8| bank[b as usize % bank.len()];

        let german = prompt.trim_end().ends_with("Die Anweisung lautete:");
        let core = if bytes[0] % 10 == 0 {
            if german { DE_VERBOSE } else { EN_VERBOSE }.to_string()
        } else if german {
            let verb = pick(DE_VERBS, bytes[1]);
            let object = pick(DE_OBJECTS, bytes[2]);
            let tail = pick(DE_TAILS, bytes[3]);
            if verb == "Schreibe" {
                format!("Schreibe {object}{tail} aus.")
            } else {
                format!("{verb} {object}{tail}.")
            }
        } else {
            let verb = pick(EN_VERBS, bytes[1]);
            let object = pick(EN_OBJECTS, bytes[2]);
            let tail = pick(EN_TAILS, bytes[3]);
            format!("{verb} {object}{tail}.")
        };
        // The induction-style stub ends without "to".
        let core = if !german && prompt.trim_end().ends_with("The instruction was") {
            format!("to {core}")
        } else {
            core
        };

        match bytes[4] % 8 {
            0 => format!("\"{core}\""),
            1 => format!("{core}{}", if german { DE_CHATTER } else { EN_CHATTER }),
            2 => format!(" {core}"),
            _ => core,
        }
    }

    fn task_input(prompt: &str) -> Option<&str> {
        let start = prompt.rfind("Input: ")? + "Input: ".len();
        let rest = &prompt[start..];
        let end = rest.find("\nOutput:")?;
        Some(&rest[..end])
    }
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

impl LlmBackend for MockBackend {
    fn backend_id(&self) -> String {
        "mock".to_string()
    }

    fn generate(
        &self,
        prompt: &str,
        config: &GenerationConfig,
    ) -> Result<CompletionBatch, BackendError> {
        check_request(prompt, config)?;
        let completions: Vec<String> = (0..config.num_candidates_per_sample)
            .map(|i| self.completion(prompt, i))
            .collect();
        let usage = Usage {
            prompt_tokens: word_count(prompt) * completions.len() as u64,
            completion_tokens: completions.iter().map(|c| word_count(c)).sum(),
        };
        Ok(CompletionBatch {
            prompt_hash: sha256_hex(prompt),
            completions,
            usage,
            backend_id: self.backend_id(),
        })
    }

    fn infer(&self, task_prompt: &str, _config: &GenerationConfig) -> Result<String, BackendError> {
        if task_prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        if let Some(gold) = Self::task_input(task_prompt).and_then(|i| self.gold_by_input.get(i)) {
            return Ok(gold.clone());
        }
        Ok(self.completion(task_prompt, 0))
    }
}
