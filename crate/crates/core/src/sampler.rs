//! Randomized demonstration subsets.
//!
//! Sample A and sample B are disjoint draws of `k` examples each, with
//! `k = min(sample_size, n / 2)`. Sample C takes `ceil(k / 2)` of A and
//! `floor(k / 2)` of B. All draws come from a ChaCha8 stream seeded with the
//! configured `u64`, using a partial Fisher-Yates shuffle, so a sample's order
//! is its draw order and the result depends only on pool order and seed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::example_pool::{ExamplePair, ExamplePool, MIN_POOL_SIZE};

pub const DEFAULT_SAMPLE_SIZE: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("pool has {found} examples, at least {needed} are required")]
    PoolTooSmall { found: usize, needed: usize },
    #[error("sample size must be at least 2, got {0}")]
    InvalidSampleSize(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SampleLabel {
    A,
    B,
    C,
}

impl fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleLabel::A => "A",
            SampleLabel::B => "B",
            SampleLabel::C => "C",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub sample_size: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed,
        }
    }
}

/// Example ids of the three samples, in draw order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTriple {
    pub sample_a: Vec<String>,
    pub sample_b: Vec<String>,
    pub sample_c: Vec<String>,
    pub seed: u64,
}

impl SampleTriple {
    pub fn labelled(&self) -> [(SampleLabel, &[String]); 3] {
        [
            (SampleLabel::A, &self.sample_a),
            (SampleLabel::B, &self.sample_b),
            (SampleLabel::C, &self.sample_c),
        ]
    }

    /// Resolves ids back to the pool's example pairs.
    pub fn examples<'p>(&self, pool: &'p ExamplePool, label: SampleLabel) -> Vec<&'p ExamplePair> {
        let ids = match label {
            SampleLabel::A => &self.sample_a,
            SampleLabel::B => &self.sample_b,
            SampleLabel::C => &self.sample_c,
        };
        ids.iter()
            .map(|id| pool.get(id).expect("sample ids come from the pool"))
            .collect()
    }
}

/// Moves `count` uniformly chosen elements to the front of `items[start..]`,
/// in draw order.
fn partial_shuffle<T>(items: &mut [T], start: usize, count: usize, rng: &mut ChaCha8Rng) {
    let n = items.len();
    for i in start..start + count {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
}

pub fn build_samples(
    pool: &ExamplePool,
    config: &SamplerConfig,
) -> Result<SampleTriple, SamplerError> {
    if config.sample_size < 2 {
        return Err(SamplerError::InvalidSampleSize(config.sample_size));
    }
    let n = pool.len();
    if n < MIN_POOL_SIZE {
        return Err(SamplerError::PoolTooSmall {
            found: n,
            needed: MIN_POOL_SIZE,
        });
    }
    let k = config.sample_size.min(n / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut order: Vec<usize> = (0..n).collect();
    partial_shuffle(&mut order, 0, 2 * k, &mut rng);
    let mut a = order[..k].to_vec();
    let mut b = order[k..2 * k].to_vec();

    let from_a = k.div_ceil(2);
    let from_b = k / 2;
    let sample_a = ids(pool, &a);
    let sample_b = ids(pool, &b);
    partial_shuffle(&mut a, 0, from_a, &mut rng);
    partial_shuffle(&mut b, 0, from_b, &mut rng);
    let c: Vec<usize> = a[..from_a].iter().chain(&b[..from_b]).copied().collect();

    Ok(SampleTriple {
        sample_a,
        sample_b,
        sample_c: ids(pool, &c),
        seed: config.seed,
    })
}

/// A seed from OS entropy, for runs where the user gave none. Record it.
pub fn entropy_seed() -> u64 {
    rand::random()
}

/// A single uniform draw of exactly `size` examples.
pub fn draw_single(
    pool: &ExamplePool,
    size: usize,
    seed: u64,
) -> Result<Vec<String>, SamplerError> {
    if pool.len() < size {
        return Err(SamplerError::PoolTooSmall {
            found: pool.len(),
            needed: size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    partial_shuffle(&mut order, 0, size, &mut rng);
    Ok(ids(pool, &order[..size]))
}

fn ids(pool: &ExamplePool, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| pool.examples()[i].id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example_pool::Language;
    use std::collections::HashSet;

    fn pool(n: usize) -> ExamplePool {
        let examples = (0..n)
            .map(|i| ExamplePair {
                id: format!("p#{i}"),
                input_text: format!("in {i}"),
                output_text: format!("out {i}"),
            })
            .collect();
        ExamplePool::new(examples, Language::English).unwrap()
    }

    fn check(triple: &SampleTriple, k: usize) {
        let a: HashSet<_> = triple.sample_a.iter().collect();
        let b: HashSet<_> = triple.sample_b.iter().collect();
        let c: HashSet<_> = triple.sample_c.iter().collect();
        assert_eq!((a.len(), b.len(), c.len()), (k, k, k));
        assert!(a.is_disjoint(&b));
        assert_eq!(c.intersection(&a).count(), k.div_ceil(2));
        assert_eq!(c.intersection(&b).count(), k / 2);
    }

    #[test]
    fn ten_examples_seed_42() {
        let t = build_samples(&pool(10), &SamplerConfig::new(42)).unwrap();
        check(&t, 5);
        assert_eq!(t.seed, 42);
    }

    #[test]
    fn eight_examples_clamp_to_four() {
        let t = build_samples(&pool(8), &SamplerConfig::new(1)).unwrap();
        check(&t, 4);
    }

    #[test]
    fn c_lists_a_draws_first() {
        let t = build_samples(&pool(10), &SamplerConfig::new(9)).unwrap();
        let a: HashSet<_> = t.sample_a.iter().collect();
        assert!(t.sample_c[..3].iter().all(|id| a.contains(id)));
        assert!(t.sample_c[3..].iter().all(|id| !a.contains(id)));
    }

    #[test]
    fn minimum_pool_and_bad_size() {
        let four = pool(4);
        assert!(build_samples(&four, &SamplerConfig::new(0)).is_ok());
        let cfg = SamplerConfig {
            sample_size: 1,
            seed: 0,
        };
        assert_eq!(
            build_samples(&pool(10), &cfg),
            Err(SamplerError::InvalidSampleSize(1))
        );
    }

    #[test]
    fn single_draw() {
        let ids = draw_single(&pool(10), 5, 3).unwrap();
        assert_eq!(ids.iter().collect::<HashSet<_>>().len(), 5);
        assert_eq!(ids, draw_single(&pool(10), 5, 3).unwrap());
        assert_eq!(
            draw_single(&pool(4), 5, 3),
            Err(SamplerError::PoolTooSmall {
                found: 4,
                needed: 5
            })
        );
    }
}
