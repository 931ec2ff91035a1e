//! On-disk formats: standoff and nested-IOB corpora, embedding and
//! context-vector text files, label grouping maps, and the binary model
//! checkpoint.

mod checkpoint;
mod context;
mod embeddings;
mod iob;
mod labelmap;
mod standoff;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use context::{attach_context, load_context_vectors, ContextVectors};
pub use embeddings::{load_embeddings, LoadedEmbeddings};
pub use iob::parse_iob_nested;
pub use labelmap::{LabelMap, MapOutcome};
pub use standoff::{parse_standoff, write_standoff};

use thiserror::Error;

/// Which corpus reader to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    Standoff,
    IobNested,
}

impl CorpusFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standoff" => Some(CorpusFormat::Standoff),
            "iob-nested" => Some(CorpusFormat::IobNested),
            _ => None,
        }
    }
}

/// A skipped input line, reported but not fatal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineWarning {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: span ({start},{len}) exceeds sentence length {tokens}")]
    SpanOutOfRange {
        line: usize,
        start: usize,
        len: usize,
        tokens: usize,
    },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("{0}")]
    Corpus(String),
    #[error("checkpoint has version {found}, expected {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt checkpoint: {reason}")]
    CorruptFile { reason: String },
    #[error("checkpoint does not match its declared spec: {reason}")]
    SpecMismatch { reason: String },
    #[error("empty input: {reason}")]
    Empty { reason: String },
    #[error("sentence {sentence}: token {token} has no context vector")]
    MissingContext { sentence: String, token: usize },
}

/// Reads a corpus file in the given format; sentences get `default_split`
/// as their split tag.
pub fn read_corpus(
    path: &std::path::Path,
    format: CorpusFormat,
    label_map: Option<&LabelMap>,
    default_split: nestag_core::corpus::Split,
) -> Result<nestag_core::corpus::Corpus, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::Corpus(format!(
        "{}: {e}",
        path.display()
    )))?;
    match format {
        CorpusFormat::Standoff => parse_standoff(&text, label_map, default_split),
        CorpusFormat::IobNested => parse_iob_nested(&text, label_map, default_split),
    }
}
