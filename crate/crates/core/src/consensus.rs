//! Consensus ranking of candidate instructions.
//!
//! Each candidate is scored by its mean Jaro-Winkler similarity to every
//! other candidate (self excluded). Candidates the model keeps converging on
//! score high; idiosyncratic or rambling ones score low.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::SampleLabel;
use crate::similarity::{jaro_winkler, SimilarityParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("consensus needs at least 2 candidates, got {0}")]
    TooFewCandidates(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePrompt {
    pub text: String,
    pub sample_label: SampleLabel,
    pub index: usize,
    pub raw_completion: String,
}

/// Upper triangle of the pairwise similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    upper: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn compute<S: AsRef<str>>(texts: &[S], params: &SimilarityParams) -> Self {
        let size = texts.len();
        let mut upper = Vec::with_capacity(size * size.saturating_sub(1) / 2);
        for i in 0..size {
            for j in i + 1..size {
                upper.push(jaro_winkler(texts[i].as_ref(), texts[j].as_ref(), params));
            }
        }
        Self { size, upper }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of distinct pairs scored, `k(k-1)/2`.
    pub fn pair_count(&self) -> usize {
        self.upper.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            Ordering::Equal => 1.0,
            Ordering::Greater => self.get(j, i),
            Ordering::Less => {
                // Rows before i contribute (size-1) + (size-2) + ... entries.
                let row_start = i * (2 * self.size - i - 1) / 2;
                self.upper[row_start + (j - i - 1)]
            }
        }
    }

    /// Mean similarity of each row to every other row.
    pub fn mean_scores(&self) -> Vec<f64> {
        let denom = (self.size - 1) as f64;
        (0..self.size)
            .map(|i| {
                let mut row: Vec<f64> = (0..self.size)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j))
                    .collect();
                // Summing in sorted order makes the score independent of
                // candidate order, bit for bit.
                row.sort_by(f64::total_cmp);
                row.iter().sum::<f64>() / denom
            })
            .collect()
    }
}

pub fn consensus_scores(
    candidates: &[CandidatePrompt],
    params: &SimilarityParams,
) -> Result<Vec<f64>, ConsensusError> {
    if candidates.len() < 2 {
        return Err(ConsensusError::TooFewCandidates(candidates.len()));
    }
    let texts: Vec<&str> = candidates.iter().map(|c| c.text.as_str()).collect();
    Ok(SimilarityMatrix::compute(&texts, params).mean_scores())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub candidate: CandidatePrompt,
    pub score: f64,
}

/// Candidates sorted by score, highest first. Ties go to the shorter text,
/// then the lexicographically smaller text, then `(sample_label, index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPromptList {
    pub entries: Vec<RankedEntry>,
}

impl RankedPromptList {
    /// A one-candidate "ranking", used when only a single candidate is
    /// generated and there is nothing to compare against.
    pub fn single(candidate: CandidatePrompt) -> Self {
        Self {
            entries: vec![RankedEntry {
                candidate,
                score: 1.0,
            }],
        }
    }

    pub fn top(&self) -> &RankedEntry {
        &self.entries[0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn tie_break(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| {
            a.candidate
                .text
                .chars()
                .count()
                .cmp(&b.candidate.text.chars().count())
        })
        .then_with(|| a.candidate.text.cmp(&b.candidate.text))
        .then_with(|| a.candidate.sample_label.cmp(&b.candidate.sample_label))
        .then_with(|| a.candidate.index.cmp(&b.candidate.index))
}

pub fn rank(
    candidates: &[CandidatePrompt],
    params: &SimilarityParams,
) -> Result<RankedPromptList, ConsensusError> {
    let scores = consensus_scores(candidates, params)?;
    let mut entries: Vec<RankedEntry> = candidates
        .iter()
        .cloned()
        .zip(scores)
        .map(|(candidate, score)| RankedEntry { candidate, score })
        .collect();
    entries.sort_by(tie_break);
    Ok(RankedPromptList { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(text: &str, label: SampleLabel, index: usize) -> CandidatePrompt {
        CandidatePrompt {
            text: text.to_string(),
            sample_label: label,
            index,
            raw_completion: text.to_string(),
        }
    }

    fn set(texts: &[&str]) -> Vec<CandidatePrompt> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| cand(t, SampleLabel::A, i))
            .collect()
    }

    #[test]
    fn identical_candidates_score_one() {
        let c = set(&["same", "same", "same"]);
        assert_eq!(
            consensus_scores(&c, &SimilarityParams::default()).unwrap(),
            [1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn full_tie_falls_through_to_label_and_index() {
        let c = vec![
            cand("same", SampleLabel::C, 0),
            cand("same", SampleLabel::A, 1),
            cand("same", SampleLabel::A, 0),
            cand("same", SampleLabel::B, 2),
        ];
        let ranked = rank(&c, &SimilarityParams::default()).unwrap();
        let order: Vec<(SampleLabel, usize)> = ranked
            .entries
            .iter()
            .map(|e| (e.candidate.sample_label, e.candidate.index))
            .collect();
        assert_eq!(
            order,
            [
                (SampleLabel::A, 0),
                (SampleLabel::A, 1),
                (SampleLabel::B, 2),
                (SampleLabel::C, 0)
            ]
        );
    }

    #[test]
    fn ties_prefer_shorter_then_lexicographic() {
        let mk = |text: &str, score: f64| RankedEntry {
            candidate: cand(text, SampleLabel::A, 0),
            score,
        };
        let mut entries = [
            mk("bbb", 0.5),
            mk("aaaa", 0.5),
            mk("aaa", 0.5),
            mk("zz", 0.4),
        ];
        entries.sort_by(tie_break);
        let texts: Vec<&str> = entries.iter().map(|e| e.candidate.text.as_str()).collect();
        assert_eq!(texts, ["aaa", "bbb", "aaaa", "zz"]);
    }

    #[test]
    fn too_few() {
        assert_eq!(
            rank(&set(&["one"]), &SimilarityParams::default()),
            Err(ConsensusError::TooFewCandidates(1))
        );
        assert_eq!(
            consensus_scores(&[], &SimilarityParams::default()),
            Err(ConsensusError::TooFewCandidates(0))
        );
    }

    #[test]
    fn matrix_indexing_is_symmetric() {
        let texts = ["alpha", "alpine", "beta", "delta", "alphabet"];
        let m = SimilarityMatrix::compute(&texts, &SimilarityParams::default());
        assert_eq!(m.pair_count(), 10);
        for i in 0..5 {
            for j in 0..5 {
                let direct = if i == j {
                    1.0
                } else {
                    jaro_winkler(texts[i], texts[j], &SimilarityParams::default())
                };
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!((m.get(i, j) - direct).abs() < 1e-15);
            }
        }
    }
}
