//! Model checkpoints: a text header (magic, version, spec as key=value,
//! vocabulary) followed by shape-prefixed little-endian float64 arrays.
//! Round-trips are bit-exact and the file self-describes every shape.

use std::path::Path;

use nestag_core::model::{ModelSpec, PartlyLayeredNet, Variant};
use nestag_core::numerics::Tensor;

use super::FormatError;
use crate::io::write_atomic;

pub const CHECKPOINT_MAGIC: &str = "nestag-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const DATA_MARKER: &[u8] = b"#data\n";

pub fn save_checkpoint(net: &PartlyLayeredNet, path: &Path) -> Result<(), FormatError> {
    let bytes = checkpoint_bytes(net)?;
    write_atomic(path, &bytes).map_err(|e| FormatError::Corpus(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<PartlyLayeredNet, FormatError> {
    let bytes = std::fs::read(path)
        .map_err(|e| FormatError::Corpus(format!("{}: {e}", path.display())))?;
    parse_checkpoint(&bytes)
}

pub fn checkpoint_bytes(net: &PartlyLayeredNet) -> Result<Vec<u8>, FormatError> {
    let spec = net.spec();
    let mut header = String::new();
    header.push_str(&format!("{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}\n"));
    for label in &spec.labels {
        if label.contains(',') || label.contains('\n') {
            return Err(FormatError::Corpus(format!(
                "label {label:?} cannot be stored (contains a comma or newline)"
            )));
        }
    }
    header.push_str(&format!("variant={}\n", spec.variant));
    header.push_str(&format!("max_len={}\n", spec.max_len));
    header.push_str(&format!("labels={}\n", spec.labels.join(",")));
    header.push_str(&format!("embed_dim={}\n", spec.embed_dim));
    header.push_str(&format!("context_dim={}\n", spec.context_dim));
    header.push_str(&format!("lstm_layers={}\n", spec.lstm_layers));
    header.push_str(&format!("hidden_dim={}\n", spec.hidden_dim));
    header.push_str(&format!("lstm_dropout={}\n", spec.lstm_dropout));
    header.push_str(&format!("tagging_dropout={}\n", spec.tagging_dropout));
    header.push_str(&format!("input_dropout={}\n", spec.input_dropout));
    header.push_str(&format!("head_hidden={}\n", spec.head_hidden));
    header.push_str(&format!("bidirectional={}\n", spec.bidirectional));
    header.push_str(&format!("embedding_trainable={}\n", net.embedding_trainable()));
    let vocab = net.vocab().tokens();
    header.push_str(&format!("vocab={}\n", vocab.len()));
    for token in vocab {
        if token.contains('\t') || token.contains('\n') {
            return Err(FormatError::Corpus(format!(
                "token {token:?} cannot be stored (contains a tab or newline)"
            )));
        }
        header.push_str(&format!("v\t{token}\n"));
    }
    header.push_str(&format!("params={}\n", net.store().len()));

    let mut out = header.into_bytes();
    out.extend_from_slice(DATA_MARKER);
    for (_, name, tensor) in net.store().iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<PartlyLayeredNet, FormatError> {
    let corrupt = |reason: &str| FormatError::CorruptFile {
        reason: reason.to_string(),
    };
    let data_at = find_marker(bytes).ok_or_else(|| corrupt("missing data section"))?;
    let header = std::str::from_utf8(&bytes[..data_at])
        .map_err(|_| corrupt("header is not valid UTF-8"))?;
    let mut lines = header.lines();

    let magic = lines.next().ok_or_else(|| corrupt("empty file"))?;
    let version = magic
        .strip_prefix(CHECKPOINT_MAGIC)
        .map(str::trim)
        .ok_or_else(|| corrupt("bad magic"))?;
    if version != format!("v{CHECKPOINT_VERSION}") {
        return Err(FormatError::VersionMismatch {
            found: version.to_string(),
            expected: CHECKPOINT_VERSION,
        });
    }

    let mut fields = std::collections::BTreeMap::new();
    let mut vocab: Vec<String> = Vec::new();
    let mut params_declared: Option<usize> = None;
    for line in lines {
        if let Some(token) = line.strip_prefix("v\t") {
            vocab.push(token.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| corrupt(&format!("bad header line {line:?}")))?;
        if key == "params" {
            params_declared = Some(
                value
                    .parse()
                    .map_err(|_| corrupt("bad params count"))?,
            );
        } else {
            fields.insert(key.to_string(), value.to_string());
        }
    }

    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| corrupt(&format!("missing header field {key}")))
    };
    let parse_usize = |key: &str| -> Result<usize, FormatError> {
        get(key)?.parse().map_err(|_| corrupt(&format!("bad {key}")))
    };
    let parse_f64 = |key: &str| -> Result<f64, FormatError> {
        get(key)?.parse().map_err(|_| corrupt(&format!("bad {key}")))
    };
    let parse_bool = |key: &str| -> Result<bool, FormatError> {
        get(key)?.parse().map_err(|_| corrupt(&format!("bad {key}")))
    };

    let variant = Variant::parse(get("variant")?)
        .ok_or_else(|| corrupt(&format!("unknown variant {:?}", fields["variant"])))?;
    let spec = ModelSpec {
        variant,
        max_len: parse_usize("max_len")?,
        labels: get("labels")?.split(',').map(str::to_string).collect(),
        embed_dim: parse_usize("embed_dim")?,
        context_dim: parse_usize("context_dim")?,
        lstm_layers: parse_usize("lstm_layers")?,
        hidden_dim: parse_usize("hidden_dim")?,
        lstm_dropout: parse_f64("lstm_dropout")?,
        tagging_dropout: parse_f64("tagging_dropout")?,
        input_dropout: parse_f64("input_dropout")?,
        head_hidden: parse_usize("head_hidden")?,
        bidirectional: parse_bool("bidirectional")?,
    };
    let embedding_trainable = parse_bool("embedding_trainable")?;
    let vocab_declared = parse_usize("vocab")?;
    if vocab.len() != vocab_declared {
        return Err(corrupt(&format!(
            "vocab declares {vocab_declared} tokens, found {}",
            vocab.len()
        )));
    }
    let params_declared = params_declared.ok_or_else(|| corrupt("missing params count"))?;

    let mut cursor = &bytes[data_at + DATA_MARKER.len()..];
    let mut params = Vec::with_capacity(params_declared);
    for _ in 0..params_declared {
        let name_len = read_u32(&mut cursor).ok_or_else(|| corrupt("truncated array name"))? as usize;
        if cursor.len() < name_len {
            return Err(corrupt("truncated array name"));
        }
        let name = std::str::from_utf8(&cursor[..name_len])
            .map_err(|_| corrupt("array name is not valid UTF-8"))?
            .to_string();
        cursor = &cursor[name_len..];
        let ndim = read_u32(&mut cursor).ok_or_else(|| corrupt("truncated shape"))? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut cursor).ok_or_else(|| corrupt("truncated shape"))? as usize);
        }
        let numel: usize = shape.iter().product();
        if cursor.len() < numel * 8 {
            return Err(corrupt(&format!("truncated data for array {name}")));
        }
        let mut data = Vec::with_capacity(numel);
        for chunk in cursor[..numel * 8].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
        }
        cursor = &cursor[numel * 8..];
        let tensor = Tensor::new(shape, data)
            .map_err(|e| corrupt(&format!("array {name}: {e}")))?;
        params.push((name, tensor));
    }
    if !cursor.is_empty() {
        return Err(corrupt("trailing bytes after the last array"));
    }

    PartlyLayeredNet::from_parts(spec, vocab, embedding_trainable, params).map_err(|e| {
        FormatError::SpecMismatch {
            reason: e.to_string(),
        }
    })
}

fn find_marker(bytes: &[u8]) -> Option<usize> {
    bytes
        .windows(DATA_MARKER.len())
        .position(|w| w == DATA_MARKER)
}

fn read_u32(cursor: &mut &[u8]) -> Option<u32> {
    if cursor.len() < 4 {
        return None;
    }
    let v = u32::from_le_bytes(cursor[..4].try_into().expect("4 bytes"));
    *cursor = &cursor[4..];
    Some(v)
}
