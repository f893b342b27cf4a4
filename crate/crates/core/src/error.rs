use std::path::PathBuf;

use thiserror::Error;

use crate::cne_eval::EvalError;
use crate::consensus::ConsensusError;
use crate::example_pool::PoolError;
use crate::llm_backend::BackendError;
use crate::meta_prompt::MetaPromptError;
use crate::sampler::SamplerError;
use crate::similarity::SimilarityError;

/// Process exit codes for each error class.
pub mod exit_code {
    pub const SUCCESS: u8 = 0;
    pub const INPUT: u8 = 2;
    pub const BACKEND: u8 = 3;
    pub const EVALUATION: u8 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    MetaPrompt(#[from] MetaPromptError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("demonstrations requested but no pool was given")]
    MissingDemonstrationPool,
    #[error("prompt file {0} is empty")]
    EmptyPromptFile(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        use exit_code::*;
        match self {
            Error::Pool(_)
            | Error::Sampler(_)
            | Error::MetaPrompt(_)
            | Error::Similarity(_)
            | Error::EmptyPromptFile(_)
            | Error::MissingDemonstrationPool
            | Error::Io { .. } => INPUT,
            Error::Backend(BackendError::InvalidConfig(_)) => INPUT,
            Error::Backend(_) | Error::Eval(EvalError::Backend(_)) => BACKEND,
            Error::Eval(EvalError::InvalidThreshold(_)) => INPUT,
            Error::Eval(_) | Error::Consensus(_) => EVALUATION,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
