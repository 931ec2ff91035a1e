//! Span/tag conversions: the BO encoding per word-length, its inverse,
//! nested-level assignment, and the concept-candidate filter.
//!
//! The tagging scheme is one begin/other row per word-length `m`: a token
//! tagged `B-label` in row `m` begins a span covering that token plus the
//! next `m - 1`. Spans of different lengths live in different rows, so
//! nested and overlapping spans never collide. All functions here are
//! pure.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A labeled, position-anchored span of whole tokens.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    /// 0-based index of the first token.
    pub start: usize,
    /// Number of tokens covered, at least 1.
    pub len: usize,
    /// Entity label (e.g. `Concept`, `Protein`).
    pub label: String,
}

impl Span {
    pub fn new(start: usize, len: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            len,
            label: label.into(),
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// Strict interval containment: proper subinterval, labels ignored.
    pub fn strictly_contains(&self, other: &Span) -> bool {
        self.start <= other.start
            && other.end() <= self.end()
            && (self.start, self.len) != (other.start, other.len)
    }
}

/// Per-token tag for one word-length row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tag {
    /// No span of this row's length begins here.
    Outside,
    /// A span of this row's length begins here, with this label.
    Begin(String),
}

/// One BO row: the tags of every token for a single word-length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSequence {
    /// The word-length this row encodes (1-based).
    pub word_len: usize,
    pub tags: Vec<Tag>,
}

impl TagSequence {
    pub fn all_outside(word_len: usize, n: usize) -> Self {
        TagSequence {
            word_len,
            tags: (0..n).map(|_| Tag::Outside).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// A span annotated with its nesting depth (1 = innermost).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedSpan {
    pub span: Span,
    pub level: usize,
}

/// Part-of-speech tags used by the candidate filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pos {
    Noun,
    Verb,
    Conj,
    Art,
    Pron,
    Other,
}

impl Pos {
    pub fn parse(s: &str) -> Option<Pos> {
        match s {
            "NOUN" => Some(Pos::Noun),
            "VERB" => Some(Pos::Verb),
            "CONJ" => Some(Pos::Conj),
            "ART" => Some(Pos::Art),
            "PRON" => Some(Pos::Pron),
            "OTHER" => Some(Pos::Other),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Conj => "CONJ",
            Pos::Art => "ART",
            Pos::Pron => "PRON",
            Pos::Other => "OTHER",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodecError {
    /// A span does not fit in the sentence or exceeds the row count.
    SpanOutOfRange {
        start: usize,
        len: usize,
        sentence_len: usize,
        max_len: usize,
    },
    /// Two gold spans with the same start and length carry different labels.
    AmbiguousGold { start: usize, len: usize },
    /// The candidate filter was given no tokens.
    EmptyCandidate,
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::SpanOutOfRange {
                start,
                len,
                sentence_len,
                max_len,
            } => write!(
                f,
                "span ({start},{len}) out of range for sentence length {sentence_len}, max word-length {max_len}"
            ),
            CodecError::AmbiguousGold { start, len } => write!(
                f,
                "ambiguous gold: spans at ({start},{len}) carry different labels"
            ),
            CodecError::EmptyCandidate => write!(f, "empty candidate"),
        }
    }
}

impl core::error::Error for CodecError {}

/// Encodes a span set as one BO row per word-length `1..=max_len`.
///
/// Row `m` carries `B-label` exactly at the starts of length-`m` spans and
/// `O` elsewhere. Identical spans are deduplicated; same-position,
/// same-length spans with different labels are rejected as ambiguous.
pub fn encode_bo(
    spans: &[Span],
    sentence_len: usize,
    max_len: usize,
) -> Result<Vec<TagSequence>, CodecError> {
    let mut rows: Vec<TagSequence> = (1..=max_len)
        .map(|m| TagSequence::all_outside(m, sentence_len))
        .collect();
    for span in spans {
        if span.len == 0
            || span.len > max_len
            || span.start >= sentence_len
            || span.end() > sentence_len
        {
            return Err(CodecError::SpanOutOfRange {
                start: span.start,
                len: span.len,
                sentence_len,
                max_len,
            });
        }
        let slot = &mut rows[span.len - 1].tags[span.start];
        match slot {
            Tag::Outside => *slot = Tag::Begin(span.label.clone()),
            Tag::Begin(existing) if *existing == span.label => {}
            Tag::Begin(_) => {
                return Err(CodecError::AmbiguousGold {
                    start: span.start,
                    len: span.len,
                });
            }
        }
    }
    Ok(rows)
}

/// Exact inverse of [`encode_bo`]: every `B-label` at position `i` in row
/// `m` yields `Span(i, m, label)`. Returns spans sorted and deduplicated.
pub fn decode_spans(rows: &[TagSequence]) -> Vec<Span> {
    let mut out = BTreeSet::new();
    for row in rows {
        for (i, tag) in row.tags.iter().enumerate() {
            if let Tag::Begin(label) = tag {
                out.insert(Span::new(i, row.word_len, label.clone()));
            }
        }
    }
    out.into_iter().collect()
}

/// Splits a span set by the maximum encodable word-length: `(kept, dropped)`.
///
/// Ingestion uses this so over-long spans are reported and dropped from
/// training targets instead of silently truncated.
pub fn partition_by_max_len(spans: &[Span], max_len: usize) -> (Vec<Span>, Vec<Span>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in spans {
        if s.len <= max_len {
            kept.push(s.clone());
        } else {
            dropped.push(s.clone());
        }
    }
    (kept, dropped)
}

/// Assigns nesting levels: a span's level is one more than the maximum
/// level among the spans it strictly contains (1 when it contains none).
/// Equal intervals with different labels share a level. Output is sorted
/// by `(start, len, label)`.
pub fn assign_nested_levels(spans: &[Span]) -> Vec<NestedSpan> {
    let unique: Vec<Span> = spans
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    // Levels only depend on intervals; process shorter intervals first so
    // every strictly contained interval is already assigned.
    let mut intervals: Vec<(usize, usize)> = unique
        .iter()
        .map(|s| (s.start, s.len))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    intervals.sort_by_key(|&(start, len)| (len, start));
    let mut level_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(start, len) in &intervals {
        let me = Span::new(start, len, "");
        let inner_max = level_of
            .iter()
            .filter(|&(&(s, l), _)| me.strictly_contains(&Span::new(s, l, "")))
            .map(|(_, &lvl)| lvl)
            .max()
            .unwrap_or(0);
        level_of.insert((start, len), inner_max + 1);
    }
    unique
        .into_iter()
        .map(|span| {
            let level = level_of[&(span.start, span.len)];
            NestedSpan { span, level }
        })
        .collect()
}

/// Outcome of the concept-candidate filter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

/// Which heuristic rule a rejected candidate violated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    /// The candidate contains no noun.
    NoNoun,
    /// The first token's part of speech is disallowed at the boundary.
    StartsWith(Pos),
    /// The last token's part of speech is disallowed at the boundary.
    EndsWith(Pos),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NoNoun => write!(f, "no-noun"),
            RejectReason::StartsWith(p) => write!(f, "starts-with-{}", boundary_name(*p)),
            RejectReason::EndsWith(p) => write!(f, "ends-with-{}", boundary_name(*p)),
        }
    }
}

fn boundary_name(p: Pos) -> &'static str {
    match p {
        Pos::Verb => "verb",
        Pos::Conj => "conjunction",
        Pos::Art => "article",
        Pos::Pron => "pronoun",
        Pos::Noun => "noun",
        Pos::Other => "other",
    }
}

fn boundary_disallowed(p: Pos) -> bool {
    matches!(p, Pos::Verb | Pos::Conj | Pos::Art | Pos::Pron)
}

/// Applies the concept-candidate heuristics to a POS-tagged token list:
/// reject candidates containing no noun, or starting or ending with a
/// verb, conjunction, article or pronoun.
pub fn filter_concept_candidates(tagged: &[(String, Pos)]) -> Result<FilterDecision, CodecError> {
    if tagged.is_empty() {
        return Err(CodecError::EmptyCandidate);
    }
    if !tagged.iter().any(|(_, p)| *p == Pos::Noun) {
        return Ok(FilterDecision::Reject(RejectReason::NoNoun));
    }
    let first = tagged.first().map(|(_, p)| *p).expect("non-empty");
    let last = tagged.last().map(|(_, p)| *p).expect("non-empty");
    if boundary_disallowed(first) {
        return Ok(FilterDecision::Reject(RejectReason::StartsWith(first)));
    }
    if boundary_disallowed(last) {
        return Ok(FilterDecision::Reject(RejectReason::EndsWith(last)));
    }
    Ok(FilterDecision::Accept)
}
