//! Precomputed per-token context vectors: the embedding text format keyed
//! by `sentenceid:tokenindex` instead of a token.

use std::collections::BTreeMap;

use nestag_core::corpus::Corpus;
use nestag_core::numerics::Tensor;

use super::{FormatError, LineWarning};

#[derive(Clone, Debug)]
pub struct ContextVectors {
    vectors: BTreeMap<(String, usize), Vec<f64>>,
    pub dim: usize,
}

pub fn load_context_vectors(
    path: &std::path::Path,
) -> Result<(ContextVectors, Vec<LineWarning>), FormatError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FormatError::Corpus(format!("{}: {e}", path.display())))?;
    parse_context_vectors(&text)
}

pub fn parse_context_vectors(
    text: &str,
) -> Result<(ContextVectors, Vec<LineWarning>), FormatError> {
    let (loaded, mut warnings) = super::embeddings::parse_embeddings(text)?;
    let mut vectors = BTreeMap::new();
    for (idx, (key, values)) in loaded.entries.into_iter().enumerate() {
        let Some((sentence, token_idx)) = key.rsplit_once(':') else {
            warnings.push(LineWarning {
                line: idx + 1,
                message: format!("key {key:?} is not `sentenceid:tokenindex`"),
            });
            continue;
        };
        let Ok(token_idx) = token_idx.parse::<usize>() else {
            warnings.push(LineWarning {
                line: idx + 1,
                message: format!("bad token index in key {key:?}"),
            });
            continue;
        };
        vectors.insert((sentence.to_string(), token_idx), values);
    }
    Ok((
        ContextVectors {
            vectors,
            dim: loaded.dim,
        },
        warnings,
    ))
}

/// Attaches context vectors to every sentence of a corpus. Every token of
/// every sentence must have a vector.
pub fn attach_context(corpus: &mut Corpus, context: &ContextVectors) -> Result<(), FormatError> {
    for sentence in &mut corpus.sentences {
        let mut rows = Vec::with_capacity(sentence.tokens.len());
        for t in 0..sentence.tokens.len() {
            let vec = context
                .vectors
                .get(&(sentence.id.clone(), t))
                .ok_or_else(|| FormatError::MissingContext {
                    sentence: sentence.id.clone(),
                    token: t,
                })?;
            rows.push(vec.clone());
        }
        let tensor = Tensor::from_rows(&rows)
            .map_err(|e| FormatError::Corpus(format!("sentence {}: {e}", sentence.id)))?;
        sentence.context = Some(tensor);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nestag_core::corpus::Split;

    #[test]
    fn parses_keys_and_attaches() {
        let (ctx, warnings) =
            parse_context_vectors("s1:0 0.1 0.2\ns1:1 0.3 0.4\n").unwrap();
        assert!(warnings.is_empty());
        assert_eq!(ctx.dim, 2);

        let mut corpus = super::super::parse_standoff("#id s1\na\tb\n", None, Split::Test).unwrap();
        attach_context(&mut corpus, &ctx).unwrap();
        let tensor = corpus.sentences[0].context.as_ref().unwrap();
        assert_eq!(tensor.shape(), &[2, 2]);
        assert_eq!(tensor.data(), &[0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn missing_token_vector_is_an_error() {
        let (ctx, _) = parse_context_vectors("s1:0 0.1 0.2\n").unwrap();
        let mut corpus = super::super::parse_standoff("#id s1\na\tb\n", None, Split::Test).unwrap();
        assert!(matches!(
            attach_context(&mut corpus, &ctx),
            Err(FormatError::MissingContext { token: 1, .. })
        ));
    }
}
