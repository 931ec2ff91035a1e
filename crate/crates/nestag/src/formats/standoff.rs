//! The standoff corpus format: blank-line separated blocks of
//!
//! ```text
//! #id <sentence-id>
//! tok1<TAB>tok2<TAB>...
//! #pos<TAB>NOUN<TAB>VERB<TAB>...        (optional)
//! S<TAB>start<TAB>length<TAB>label      (zero or more)
//! ```
//!
//! Reading a written corpus reproduces it byte for byte (spans are kept
//! sorted, which makes the serialization canonical).

use nestag_core::corpus::{Corpus, Sentence, Split};
use nestag_core::spancodec::{Pos, Span};

use super::{FormatError, LabelMap};

pub fn parse_standoff(
    text: &str,
    label_map: Option<&LabelMap>,
    split: Split,
) -> Result<Corpus, FormatError> {
    let mut sentences = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(parse_block(&block, label_map, split)?);
                block.clear();
            }
        } else {
            block.push((idx + 1, line));
        }
    }
    if !block.is_empty() {
        sentences.push(parse_block(&block, label_map, split)?);
    }
    Corpus::new(sentences).map_err(|e| FormatError::Corpus(e.to_string()))
}

fn parse_block(
    lines: &[(usize, &str)],
    label_map: Option<&LabelMap>,
    split: Split,
) -> Result<Sentence, FormatError> {
    let (first_no, first) = lines[0];
    let id = first
        .strip_prefix("#id ")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| FormatError::Parse {
            line: first_no,
            message: "block must start with `#id <sentence-id>`".into(),
        })?;
    let (tokens_no, token_line) = lines.get(1).copied().ok_or(FormatError::Parse {
        line: first_no,
        message: "block is missing its token line".into(),
    })?;
    let tokens: Vec<String> = token_line.split('\t').map(str::to_string).collect();
    if tokens.iter().any(String::is_empty) {
        return Err(FormatError::Parse {
            line: tokens_no,
            message: "empty token".into(),
        });
    }

    let mut pos = None;
    let mut rest = &lines[2..];
    if let Some(&(pos_no, pos_line)) = rest.first() {
        if let Some(tail) = pos_line.strip_prefix("#pos\t") {
            let tags: Vec<Pos> = tail
                .split('\t')
                .map(|p| {
                    Pos::parse(p).ok_or(FormatError::Parse {
                        line: pos_no,
                        message: format!("unknown POS tag {p:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if tags.len() != tokens.len() {
                return Err(FormatError::Parse {
                    line: pos_no,
                    message: format!("{} POS tags for {} tokens", tags.len(), tokens.len()),
                });
            }
            pos = Some(tags);
            rest = &rest[1..];
        }
    }

    let mut spans = Vec::new();
    for &(line_no, line) in rest {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 || fields[0] != "S" {
            return Err(FormatError::Parse {
                line: line_no,
                message: "expected `S<TAB>start<TAB>length<TAB>label`".into(),
            });
        }
        let start: usize = fields[1].parse().map_err(|_| FormatError::Parse {
            line: line_no,
            message: format!("bad start index {:?}", fields[1]),
        })?;
        let len: usize = fields[2].parse().map_err(|_| FormatError::Parse {
            line: line_no,
            message: format!("bad length {:?}", fields[2]),
        })?;
        if fields[3].is_empty() {
            return Err(FormatError::Parse {
                line: line_no,
                message: "empty label".into(),
            });
        }
        if len == 0 || start + len > tokens.len() {
            return Err(FormatError::SpanOutOfRange {
                line: line_no,
                start,
                len,
                tokens: tokens.len(),
            });
        }
        let label = match label_map {
            Some(map) => match map.resolve(fields[3]) {
                super::MapOutcome::Mapped(l) => l.to_string(),
                super::MapOutcome::Dropped => continue,
                super::MapOutcome::Unknown => {
                    return Err(FormatError::UnknownLabel {
                        line: line_no,
                        label: fields[3].to_string(),
                    })
                }
            },
            None => fields[3].to_string(),
        };
        spans.push(Span::new(start, len, label));
    }
    spans.sort();
    spans.dedup();

    Ok(Sentence {
        id: id.to_string(),
        tokens,
        pos,
        context: None,
        spans,
        split,
    })
}

/// Canonical serialization of sentences in the standoff format.
pub fn write_standoff(sentences: &[&Sentence]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("#id ");
        out.push_str(&s.id);
        out.push('\n');
        out.push_str(&s.tokens.join("\t"));
        out.push('\n');
        if let Some(pos) = &s.pos {
            out.push_str("#pos");
            for p in pos {
                out.push('\t');
                out.push_str(p.as_str());
            }
            out.push('\n');
        }
        let mut spans = s.spans.clone();
        spans.sort();
        spans.dedup();
        for span in &spans {
            out.push_str(&format!("S\t{}\t{}\t{}\n", span.start, span.len, span.label));
        }
    }
    out
}
