//! In-memory corpus containers shared by training and evaluation.
//!
//! Parsing and serialization of the on-disk formats live in the `nestag`
//! companion crate; this module only validates and carries the data.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::numerics::Tensor;
use crate::spancodec::{Pos, Span};

/// Which partition a sentence belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// A tokenized sentence with optional POS tags, optional precomputed
/// per-token context vectors, and its gold spans.
#[derive(Clone, Debug)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Option<Vec<Pos>>,
    /// Precomputed context vectors, one row per token.
    pub context: Option<Tensor>,
    pub spans: Vec<Span>,
    pub split: Split,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CorpusError {
    /// A gold span reaches past the end of its sentence.
    SpanOutOfBounds {
        sentence: String,
        start: usize,
        len: usize,
        tokens: usize,
    },
    /// POS tags or context vectors do not line up with the tokens.
    TokenCountMismatch {
        sentence: String,
        expected: usize,
        got: usize,
    },
    EmptySentence { sentence: String },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::SpanOutOfBounds {
                sentence,
                start,
                len,
                tokens,
            } => write!(
                f,
                "sentence {sentence}: span ({start},{len}) exceeds {tokens} tokens"
            ),
            CorpusError::TokenCountMismatch {
                sentence,
                expected,
                got,
            } => write!(
                f,
                "sentence {sentence}: expected {expected} per-token entries, got {got}"
            ),
            CorpusError::EmptySentence { sentence } => {
                write!(f, "sentence {sentence}: no tokens")
            }
        }
    }
}

impl core::error::Error for CorpusError {}

/// A collection of annotated sentences carrying their split tags.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Result<Self, CorpusError> {
        let corpus = Corpus { sentences };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for s in &self.sentences {
            if s.tokens.is_empty() {
                return Err(CorpusError::EmptySentence {
                    sentence: s.id.clone(),
                });
            }
            if let Some(pos) = &s.pos {
                if pos.len() != s.tokens.len() {
                    return Err(CorpusError::TokenCountMismatch {
                        sentence: s.id.clone(),
                        expected: s.tokens.len(),
                        got: pos.len(),
                    });
                }
            }
            if let Some(ctx) = &s.context {
                if ctx.rows() != s.tokens.len() {
                    return Err(CorpusError::TokenCountMismatch {
                        sentence: s.id.clone(),
                        expected: s.tokens.len(),
                        got: ctx.rows(),
                    });
                }
            }
            for span in &s.spans {
                if span.len == 0 || span.end() > s.tokens.len() {
                    return Err(CorpusError::SpanOutOfBounds {
                        sentence: s.id.clone(),
                        start: span.start,
                        len: span.len,
                        tokens: s.tokens.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sentence> {
        self.sentences.iter().filter(move |s| s.split == split)
    }

    /// All distinct tokens, in first-seen order.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut seen = alloc::collections::BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.sentences {
            for t in &s.tokens {
                if seen.insert(t.clone()) {
                    out.push(t.clone());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sent(id: &str, tokens: &[&str], spans: Vec<Span>, split: Split) -> Sentence {
        Sentence {
            id: id.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            pos: None,
            context: None,
            spans,
            split,
        }
    }

    #[test]
    fn validates_span_bounds() {
        let c = Corpus::new(vec![sent(
            "s1",
            &["a", "b"],
            vec![Span::new(1, 2, "X")],
            Split::Train,
        )]);
        assert!(matches!(c, Err(CorpusError::SpanOutOfBounds { .. })));
    }

    #[test]
    fn splits_partition() {
        let c = Corpus::new(vec![
            sent("s1", &["a"], vec![], Split::Train),
            sent("s2", &["b"], vec![], Split::Dev),
            sent("s3", &["c"], vec![], Split::Train),
        ])
        .unwrap();
        assert_eq!(c.split(Split::Train).count(), 2);
        assert_eq!(c.split(Split::Dev).count(), 1);
        assert_eq!(c.split(Split::Test).count(), 0);
    }

    #[test]
    fn vocabulary_first_seen_order() {
        let c = Corpus::new(vec![
            sent("s1", &["b", "a", "b"], vec![], Split::Train),
            sent("s2", &["c", "a"], vec![], Split::Train),
        ])
        .unwrap();
        assert_eq!(c.vocabulary(), vec!["b", "a", "c"]);
    }
}
