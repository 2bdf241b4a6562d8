use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("duplicate id {id} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arity mismatch: {0}")]
    Arity(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing lexicon file {}", .0.display())]
    MissingLexicon(PathBuf),

    #[error("empty lexicon file {}", .0.display())]
    EmptyLexicon(PathBuf),

    #[error("doc {doc_id}: sequence exceeds cap {cap} ({len} positions)")]
    SequenceTooLong {
        doc_id: String,
        len: usize,
        cap: usize,
    },

    #[error("invalid channel data: {0}")]
    Channel(String),

    #[error("doc id mismatch: {0}")]
    DocMismatch(String),

    #[error("duplicate feature name {0}")]
    DuplicateFeature(String),

    #[error("training data must contain at least two classes")]
    SingleClass,

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("unsupported version {0}")]
    UnsupportedVersion(u64),

    #[error("unknown label {0}")]
    UnknownLabel(String),

    #[error("no rows")]
    NoRows,

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags an error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
