use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("duplicate id {id:?} on lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("record {position}: {message}")]
    InvalidRecord { position: usize, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("palo {palo:?} has {count} record(s); at least 2 are needed to split")]
    StratumTooSmall { palo: String, count: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("document is empty")]
    EmptyDocument,

    #[error("window of {window} tokens is longer than the document ({len} tokens)")]
    WindowTooLong { window: usize, len: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("vocabulary is empty")]
    VocabularyMismatch,

    #[error("smoothing parameter must be positive, got {0}")]
    AlphaNonPositive(f64),

    #[error("{labels} labels for {rows} matrix rows")]
    LabelMismatch { labels: usize, rows: usize },

    #[error("class {0:?} has no non-empty training document")]
    EmptyClass(String),

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("runs disagree on the class set")]
    InconsistentClasses,

    #[error("no word reached the probability floor for palo {0:?}")]
    NoThreshold(String),

    #[error("vector for {label:?} has norm {norm}, expected 1")]
    Norm { label: String, norm: f64 },

    #[error("degenerate distances: {0}")]
    Degenerate(String),

    #[error("model file: {0}")]
    Model(String),
}
