//! Plain-text embedding loader: one `token v1 v2 … vd` entry per line,
//! whitespace separated. The dimension is inferred from the first valid
//! line; malformed lines are reported with their line number and skipped.

use super::{FormatError, LineWarning};

#[derive(Clone, Debug)]
pub struct LoadedEmbeddings {
    pub entries: Vec<(String, Vec<f64>)>,
    pub dim: usize,
}

pub fn load_embeddings(path: &std::path::Path) -> Result<(LoadedEmbeddings, Vec<LineWarning>), FormatError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FormatError::Corpus(format!("{}: {e}", path.display())))?;
    parse_embeddings(&text)
}

pub fn parse_embeddings(text: &str) -> Result<(LoadedEmbeddings, Vec<LineWarning>), FormatError> {
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut warnings = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) => {
                warnings.push(LineWarning {
                    line: line_no,
                    message: "unparsable vector component".into(),
                });
                continue;
            }
        };
        if values.is_empty() {
            warnings.push(LineWarning {
                line: line_no,
                message: "no vector components".into(),
            });
            continue;
        }
        if values.iter().any(|v| !v.is_finite()) {
            warnings.push(LineWarning {
                line: line_no,
                message: "non-finite vector component".into(),
            });
            continue;
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                warnings.push(LineWarning {
                    line: line_no,
                    message: format!("expected {d} components, found {}", values.len()),
                });
                continue;
            }
            _ => {}
        }
        entries.push((token.to_string(), values));
    }
    let dim = dim.ok_or(FormatError::Empty {
        reason: "no valid embedding entries".into(),
    })?;
    Ok((LoadedEmbeddings { entries, dim }, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_entries_and_infers_dim() {
        let (loaded, warnings) = parse_embeddings("the 0.1 0.2 0.3\ncat 1 2 3\n").unwrap();
        assert_eq!(loaded.dim, 3);
        assert_eq!(loaded.entries.len(), 2);
        assert!(warnings.is_empty());
        assert_eq!(loaded.entries[1].1, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_lines_are_skipped_with_line_numbers() {
        let (loaded, warnings) =
            parse_embeddings("the 0.1 0.2\nbroken x y\nshort 0.5\ncat 1 2\n").unwrap();
        assert_eq!(loaded.entries.len(), 2);
        let lines: Vec<usize> = warnings.iter().map(|w| w.line).collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            parse_embeddings(""),
            Err(FormatError::Empty { .. })
        ));
    }
}
