//! Record/replay fixtures: a JSON object mapping the SHA-256 hex digest of a
//! prompt to the completions recorded for it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use super::{BackendError, CompletionBatch, GenerationConfig, ItemFailure, LlmBackend, Usage};
use crate::digest::sha256_hex;

pub type FixtureMap = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone)]
pub struct ReplayBackend {
    fixtures: FixtureMap,
}

impl ReplayBackend {
    pub fn new(fixtures: FixtureMap) -> Self {
        Self { fixtures }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let fixture_err = |reason: String| BackendError::Fixture {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| fixture_err(e.to_string()))?;
        let fixtures = serde_json::from_str(&text).map_err(|e| fixture_err(e.to_string()))?;
        Ok(Self { fixtures })
    }

    fn lookup(&self, prompt: &str) -> Result<(String, &[String]), BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let digest = sha256_hex(prompt);
        match self.fixtures.get(&digest) {
            Some(list) if !list.is_empty() => Ok((digest, list)),
            _ => Err(BackendError::ReplayMiss(digest)),
        }
    }
}

impl LlmBackend for ReplayBackend {
    fn backend_id(&self) -> String {
        "replay".to_string()
    }

    fn generate(
        &self,
        prompt: &str,
        config: &GenerationConfig,
    ) -> Result<CompletionBatch, BackendError> {
        config.validate()?;
        let (digest, recorded) = self.lookup(prompt)?;
        let wanted = config.num_candidates_per_sample;
        let batch = CompletionBatch {
            prompt_hash: digest,
            completions: recorded.iter().take(wanted).cloned().collect(),
            usage: Usage::default(),
            backend_id: self.backend_id(),
        };
        if batch.completions.len() < wanted {
            let failures = (batch.completions.len()..wanted)
                .map(|index| ItemFailure {
                    index,
                    cause: "not present in fixture".to_string(),
                })
                .collect();
            return Err(BackendError::PartialBatch { batch, failures });
        }
        Ok(batch)
    }

    fn infer(&self, task_prompt: &str, _config: &GenerationConfig) -> Result<String, BackendError> {
        let (_, recorded) = self.lookup(task_prompt)?;
        Ok(recorded[0].clone())
    }
}

/// Wraps a backend and captures every completion it returns as a fixture.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<FixtureMap>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            recorded: Mutex::new(FixtureMap::new()),
        }
    }

    fn record(&self, prompt: &str, completions: &[String]) {
        if completions.is_empty() {
            return;
        }
        self.recorded
            .lock()
            .expect("fixture lock")
            .insert(sha256_hex(prompt), completions.to_vec());
    }

    pub fn fixtures(&self) -> FixtureMap {
        self.recorded.lock().expect("fixture lock").clone()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BackendError> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(&self.fixtures()).expect("fixtures serialize");
        text.push('\n');
        fs::write(path, text).map_err(|e| BackendError::Fixture {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn backend_id(&self) -> String {
        self.inner.backend_id()
    }

    fn generate(
        &self,
        prompt: &str,
        config: &GenerationConfig,
    ) -> Result<CompletionBatch, BackendError> {
        let result = self.inner.generate(prompt, config);
        match &result {
            Ok(batch) | Err(BackendError::PartialBatch { batch, .. }) => {
                self.record(prompt, &batch.completions)
            }
            Err(_) => {}
        }
        result
    }

    fn infer(&self, task_prompt: &str, config: &GenerationConfig) -> Result<String, BackendError> {
        let out = self.inner.infer(task_prompt, config)?;
        self.record(task_prompt, std::slice::from_ref(&out));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_backend::MockBackend;

    fn cfg(n: usize) -> GenerationConfig {
        GenerationConfig {
            num_candidates_per_sample: n,
            ..Default::default()
        }
    }

    #[test]
    fn record_then_replay() {
        let rec = RecordingBackend::new(MockBackend::new(3));
        let live = rec.generate("meta prompt", &cfg(4)).unwrap();
        let greedy = rec.infer("task prompt", &cfg(4)).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixtures.json");
        rec.save(&path).unwrap();

        let replay = ReplayBackend::load(&path).unwrap();
        assert_eq!(
            replay.generate("meta prompt", &cfg(4)).unwrap().completions,
            live.completions
        );
        assert_eq!(replay.infer("task prompt", &cfg(1)).unwrap(), greedy);
        assert!(matches!(
            replay.infer("unseen", &cfg(1)),
            Err(BackendError::ReplayMiss(_))
        ));
    }

    #[test]
    fn short_fixture_is_partial() {
        let replay = ReplayBackend::new(FixtureMap::from([(
            sha256_hex("p"),
            vec!["one".to_string(), "two".to_string()],
        )]));
        match replay.generate("p", &cfg(3)) {
            Err(BackendError::PartialBatch { batch, failures }) => {
                assert_eq!(batch.completions, ["one", "two"]);
                assert_eq!(failures.len(), 1);
                assert_eq!(failures[0].index, 2);
            }
            other => panic!("expected partial batch, got {other:?}"),
        }
        assert_eq!(replay.generate("p", &cfg(2)).unwrap().completions.len(), 2);
    }

    #[test]
    fn malformed_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "[1, 2]").unwrap();
        assert!(matches!(
            ReplayBackend::load(&path),
            Err(BackendError::Fixture { .. })
        ));
    }
}
