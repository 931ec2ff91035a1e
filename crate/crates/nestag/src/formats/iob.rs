//! Nested-IOB corpus reader: one token per line with one IOB2 tag column
//! per nesting level, blank line between sentences. The usual export
//! shape for nested-annotation corpora.

use nestag_core::corpus::{Corpus, Sentence, Split};
use nestag_core::spancodec::Span;

use super::{FormatError, LabelMap};

pub fn parse_iob_nested(
    text: &str,
    label_map: Option<&LabelMap>,
    split: Split,
) -> Result<Corpus, FormatError> {
    let mut sentences = Vec::new();
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !rows.is_empty() {
                sentences.push(parse_sentence(&rows, label_map, split, sentences.len() + 1)?);
                rows.clear();
            }
        } else {
            rows.push((idx + 1, line.split('\t').map(str::to_string).collect()));
        }
    }
    if !rows.is_empty() {
        sentences.push(parse_sentence(&rows, label_map, split, sentences.len() + 1)?);
    }
    Corpus::new(sentences).map_err(|e| FormatError::Corpus(e.to_string()))
}

fn parse_sentence(
    rows: &[(usize, Vec<String>)],
    label_map: Option<&LabelMap>,
    split: Split,
    index: usize,
) -> Result<Sentence, FormatError> {
    let columns = rows[0].1.len();
    if columns < 2 {
        return Err(FormatError::Parse {
            line: rows[0].0,
            message: "expected `token<TAB>tag...` with at least one tag column".into(),
        });
    }
    let mut tokens = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() != columns {
            return Err(FormatError::Parse {
                line: *line,
                message: format!("expected {columns} columns, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() {
            return Err(FormatError::Parse {
                line: *line,
                message: "empty token".into(),
            });
        }
        tokens.push(fields[0].clone());
    }

    let mut spans: Vec<Span> = Vec::new();
    for col in 1..columns {
        let mut open: Option<(usize, String, usize)> = None; // start, label, line
        for (t, (line, fields)) in rows.iter().enumerate() {
            let tag = fields[col].as_str();
            let (kind, label) = split_tag(tag, *line)?;
            match kind {
                'O' => {
                    if let Some((start, label, _)) = open.take() {
                        spans.push(Span::new(start, t - start, label));
                    }
                }
                'B' => {
                    if let Some((start, prev, _)) = open.take() {
                        spans.push(Span::new(start, t - start, prev));
                    }
                    open = Some((t, label.to_string(), *line));
                }
                'I' => match &open {
                    Some((_, prev, _)) if prev == label => {}
                    _ => {
                        return Err(FormatError::Parse {
                            line: *line,
                            message: format!("dangling I tag {tag:?} without a matching B"),
                        });
                    }
                },
                _ => unreachable!(),
            }
        }
        if let Some((start, label, _)) = open {
            spans.push(Span::new(start, rows.len() - start, label));
        }
    }

    if let Some(map) = label_map {
        let mut mapped = Vec::with_capacity(spans.len());
        for span in spans {
            let line = rows[span.start].0;
            match map.resolve(&span.label) {
                super::MapOutcome::Mapped(l) => {
                    mapped.push(Span::new(span.start, span.len, l));
                }
                super::MapOutcome::Dropped => {}
                super::MapOutcome::Unknown => {
                    return Err(FormatError::UnknownLabel {
                        line,
                        label: span.label.clone(),
                    })
                }
            }
        }
        spans = mapped;
    }
    spans.sort();
    spans.dedup();

    Ok(Sentence {
        id: format!("s{index}"),
        tokens,
        pos: None,
        context: None,
        spans,
        split,
    })
}

fn split_tag(tag: &str, line: usize) -> Result<(char, &str), FormatError> {
    if tag == "O" {
        return Ok(('O', ""));
    }
    match tag.split_once('-') {
        Some(("B", label)) if !label.is_empty() => Ok(('B', label)),
        Some(("I", label)) if !label.is_empty() => Ok(('I', label)),
        _ => Err(FormatError::Parse {
            line,
            message: format!("bad tag {tag:?}, expected O, B-<label> or I-<label>"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_two_nesting_levels() {
        // "human TCR delta": inner Protein at level 1, outer DNA at level 2
        let text = "human\tO\tB-DNA\nTCR\tB-protein\tI-DNA\ndelta\tO\tI-DNA\n";
        let corpus = parse_iob_nested(text, None, Split::Test).unwrap();
        let spans = &corpus.sentences[0].spans;
        assert_eq!(
            spans,
            &vec![Span::new(0, 3, "DNA"), Span::new(1, 1, "protein")]
        );
    }

    #[test]
    fn applies_label_grouping() {
        let map: LabelMap = "G#protein_molecule=Protein\nG#DNA_domain_or_region=DNA\n"
            .parse()
            .unwrap();
        let text = "TCR\tB-G#protein_molecule\nenhancer\tB-G#DNA_domain_or_region\n";
        let corpus = parse_iob_nested(text, Some(&map), Split::Test).unwrap();
        let labels: Vec<&str> = corpus.sentences[0]
            .spans
            .iter()
            .map(|s| s.label.as_str())
            .collect();
        assert_eq!(labels, vec!["Protein", "DNA"]);
    }

    #[test]
    fn unknown_label_is_an_error_under_a_map() {
        let map: LabelMap = "G#protein_molecule=Protein\n".parse().unwrap();
        let err = parse_iob_nested("x\tB-G#other\n", Some(&map), Split::Test).unwrap_err();
        assert!(matches!(err, FormatError::UnknownLabel { line: 1, .. }));
    }

    #[test]
    fn dangling_inside_tag_is_an_error() {
        let err = parse_iob_nested("a\tO\nb\tI-DNA\n", None, Split::Test).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }));
        let err = parse_iob_nested("a\tB-DNA\nb\tI-RNA\n", None, Split::Test).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }));
    }

    #[test]
    fn span_closes_at_sentence_end() {
        let corpus = parse_iob_nested("a\tB-DNA\nb\tI-DNA\n", None, Split::Test).unwrap();
        assert_eq!(corpus.sentences[0].spans, vec![Span::new(0, 2, "DNA")]);
    }

    #[test]
    fn adjacent_begins_split_spans() {
        let corpus = parse_iob_nested("a\tB-DNA\nb\tB-DNA\n", None, Split::Test).unwrap();
        assert_eq!(
            corpus.sentences[0].spans,
            vec![Span::new(0, 1, "DNA"), Span::new(1, 1, "DNA")]
        );
    }
}
