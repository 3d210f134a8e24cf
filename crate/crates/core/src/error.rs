//! Error types shared across the library.
//!
//! Errors fall into two broad classes that callers (notably the CLI) treat
//! differently: data errors (bad input files, vocabulary mismatches, malformed
//! checkpoints) and numerical aborts (non-finite loss during training).

use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: expected 3 tab-separated fields, found {found}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        found: usize,
    },

    #[error("{path}:{line}: unknown {kind} symbol {symbol:?}")]
    UnknownSymbol {
        path: PathBuf,
        line: usize,
        /// "entity" or "relation".
        kind: &'static str,
        symbol: String,
    },

    #[error("{path}:{line}: duplicate triple within split")]
    DuplicateTriple { path: PathBuf, line: usize },

    #[error("training split is empty: {path}")]
    EmptyTrainingSplit { path: PathBuf },

    #[error("checkpoint is malformed: {0}")]
    BadCheckpoint(String),

    #[error(
        "checkpoint was built for {ckpt_entities} entities / {ckpt_relations} relations, \
         but the dataset has {data_entities} / {data_relations}"
    )]
    VocabMismatch {
        ckpt_entities: usize,
        ckpt_relations: usize,
        data_entities: usize,
        data_relations: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at step {step} (step seed {step_seed:#018x}); aborting")]
    NonFiniteLoss { step: u64, step_seed: u64 },
}

impl Error {
    /// True for input/data problems (as opposed to numerical aborts).
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NonFiniteLoss { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
