//! Jaro and Jaro-Winkler string similarity.
//!
//! Both functions compare strings as sequences of Unicode scalar values, so
//! `"Änderung"` and `"Anderung"` differ in exactly one position rather than
//! in a multi-byte run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("prefix scale {0} is outside [0, 0.25]")]
    PrefixScaleOutOfRange(f64),
    #[error("prefix scale {prefix_scale} times max prefix {max_prefix} exceeds 1")]
    BonusTooLarge {
        prefix_scale: f64,
        max_prefix: usize,
    },
}

/// Winkler prefix-bonus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    prefix_scale: f64,
    max_prefix: usize,
}

impl SimilarityParams {
    pub fn new(prefix_scale: f64, max_prefix: usize) -> Result<Self, SimilarityError> {
        if !(0.0..=0.25).contains(&prefix_scale) {
            return Err(SimilarityError::PrefixScaleOutOfRange(prefix_scale));
        }
        if prefix_scale * max_prefix as f64 > 1.0 {
            return Err(SimilarityError::BonusTooLarge {
                prefix_scale,
                max_prefix,
            });
        }
        Ok(Self {
            prefix_scale,
            max_prefix,
        })
    }

    pub fn prefix_scale(&self) -> f64 {
        self.prefix_scale
    }

    pub fn max_prefix(&self) -> usize {
        self.max_prefix
    }
}

impl Default for SimilarityParams {
    /// p = 0.1, prefix capped at 4 characters.
    fn default() -> Self {
        Self {
            prefix_scale: 0.1,
            max_prefix: 4,
        }
    }
}

/// Jaro similarity in `[0, 1]`.
///
/// Two empty strings are identical (1.0); a single empty side scores 0.0.
pub fn jaro(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    jaro_chars(&a, &b)
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }

    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;

    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }

    if matches == 0 {
        return 0.0;
    }

    let a_seq = a.iter().zip(&a_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();

    let m = matches as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler similarity: the Jaro score plus a bonus for a shared prefix
/// of up to `params.max_prefix()` characters.
pub fn jaro_winkler(s1: &str, s2: &str, params: &SimilarityParams) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    let j = jaro_chars(&a, &b);
    let prefix = a
        .iter()
        .zip(&b)
        .take(params.max_prefix)
        .take_while(|(x, y)| x == y)
        .count();
    // min() guards against rounding pushing an exact 1.0 a hair above.
    (j + prefix as f64 * params.prefix_scale * (1.0 - j)).min(1.0)
}
