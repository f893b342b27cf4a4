//! Cue-free automatic prompt generation.
//!
//! Given a handful of input/output demonstrations, [`pipeline::generate_prompt`]
//! draws three randomized demonstration subsets, wraps each in a task-agnostic
//! meta-prompt, samples candidate instructions from a language model, and
//! keeps the candidate with the highest mean Jaro-Winkler similarity to all
//! others. No seed prompt, task description, validation split, or extra model
//! call for scoring is involved.
//!
//! [`cne_eval`] scores an instruction on cryptic column name expansion: the
//! model expands abbreviated column names of a table, and a column counts as
//! correct when the expansion's Jaro-Winkler similarity to the gold
//! expansion is at least 0.85.

pub mod cne_eval;
pub mod consensus;
pub mod digest;
pub mod error;
pub mod example_pool;
pub mod llm_backend;
pub mod meta_prompt;
pub mod pipeline;
pub mod sampler;
pub mod similarity;

pub use error::{Error, Result};
