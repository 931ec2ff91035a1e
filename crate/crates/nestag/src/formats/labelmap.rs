//! Label grouping maps: `raw=Grouped` lines with `#` comments, used to
//! fold fine-grained corpus labels into a model's label set. Mapping a
//! label to `-` discards spans carrying it.

use std::collections::BTreeMap;
use std::str::FromStr;

use super::FormatError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelMap {
    map: BTreeMap<String, String>,
}

/// What a raw label maps to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapOutcome<'a> {
    Mapped(&'a str),
    /// Listed with target `-`: drop spans with this label.
    Dropped,
    /// Not listed at all.
    Unknown,
}

impl LabelMap {
    pub fn resolve(&self, raw: &str) -> MapOutcome<'_> {
        match self.map.get(raw) {
            Some(target) if target == "-" => MapOutcome::Dropped,
            Some(target) => MapOutcome::Mapped(target),
            None => MapOutcome::Unknown,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FormatError> {
        std::fs::read_to_string(path)
            .map_err(|e| FormatError::Corpus(format!("{}: {e}", path.display())))?
            .parse()
    }
}

impl FromStr for LabelMap {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = BTreeMap::new();
        for (idx, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (raw, grouped) = line.split_once('=').ok_or(FormatError::Parse {
                line: idx + 1,
                message: "expected `raw=Grouped` (or `raw=-` to drop)".into(),
            })?;
            let (raw, grouped) = (raw.trim(), grouped.trim());
            if raw.is_empty() || grouped.is_empty() {
                return Err(FormatError::Parse {
                    line: idx + 1,
                    message: "empty label in mapping".into(),
                });
            }
            map.insert(raw.to_string(), grouped.to_string());
        }
        Ok(LabelMap { map })
    }
}
