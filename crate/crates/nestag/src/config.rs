//! Run configuration: flat `key=value` text with `#` comments. Unknown
//! keys are rejected. The `task` key selects the default bundle (model
//! shape, training schedule, class weights); every other key overrides
//! one field.

use std::path::{Path, PathBuf};

use nestag_core::model::{ModelSpec, Variant};
use nestag_core::training::{BatchUnit, ClassWeightTable, TaskOrder, TrainConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`, found {text:?}")]
    BadLine { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {value:?}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {reason}")]
    Invalid { reason: String },
    #[error("cannot read config: {reason}")]
    Unreadable { reason: String },
}

/// Which experiment defaults to start from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Cr,
    Ner,
    NerFlair,
}

impl TaskKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "cr" => Some(TaskKind::Cr),
            "ner" => Some(TaskKind::Ner),
            "ner-flair" => Some(TaskKind::NerFlair),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: TaskKind,
    pub spec: ModelSpec,
    pub train: TrainConfig,
    pub embedding_file: Option<PathBuf>,
    /// Overrides the default (random init: trainable; file init: frozen).
    pub embedding_trainable: Option<bool>,
    pub context_file: Option<PathBuf>,
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
}

impl RunConfig {
    pub fn defaults(task: TaskKind) -> Self {
        let (spec, mut train) = match task {
            TaskKind::Cr => (ModelSpec::cr(Variant::Base), TrainConfig::cr_lstm()),
            TaskKind::Ner => (ModelSpec::ner(Variant::Base), TrainConfig::ner_lstm()),
            TaskKind::NerFlair => {
                let spec = ModelSpec::ner(Variant::NormFlair);
                let mut train = TrainConfig::ner_lstm();
                train.batch_budget = 10_000;
                train.class_weights = ClassWeightTable::ner_flair_default();
                (spec, train)
            }
        };
        if task == TaskKind::Cr {
            train.class_weights = ClassWeightTable::cr_default();
        }
        RunConfig {
            task,
            spec,
            train,
            embedding_file: None,
            embedding_trainable: None,
            context_file: None,
            checkpoint_path: PathBuf::from("model.ckpt"),
            log_path: PathBuf::from("train-log.csv"),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            pairs.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
        }

        // task first: it decides every default
        let mut task = TaskKind::Cr;
        for (line, key, value) in &pairs {
            if key == "task" {
                task = TaskKind::parse(value).ok_or_else(|| ConfigError::BadValue {
                    line: *line,
                    key: key.clone(),
                    value: value.clone(),
                })?;
            }
        }
        let mut config = RunConfig::defaults(task);
        // resolved after all overrides so they see the final spec
        let mut uniform_weights = false;
        let mut head_hidden_set = false;

        for (line, key, value) in pairs {
            let bad = || ConfigError::BadValue {
                line,
                key: key.clone(),
                value: value.clone(),
            };
            match key.as_str() {
                "task" => {}
                "variant" => config.spec.variant = Variant::parse(&value).ok_or_else(bad)?,
                "max_len" => config.spec.max_len = value.parse().map_err(|_| bad())?,
                "labels" => {
                    config.spec.labels = value
                        .split(',')
                        .map(|l| l.trim().to_string())
                        .filter(|l| !l.is_empty())
                        .collect();
                }
                "embed_dim" => config.spec.embed_dim = value.parse().map_err(|_| bad())?,
                "context_dim" => config.spec.context_dim = value.parse().map_err(|_| bad())?,
                "lstm_layers" => config.spec.lstm_layers = value.parse().map_err(|_| bad())?,
                "hidden_dim" => config.spec.hidden_dim = value.parse().map_err(|_| bad())?,
                "lstm_dropout" => config.spec.lstm_dropout = value.parse().map_err(|_| bad())?,
                "tagging_dropout" => {
                    config.spec.tagging_dropout = value.parse().map_err(|_| bad())?
                }
                "input_dropout" => config.spec.input_dropout = value.parse().map_err(|_| bad())?,
                "head_hidden" => {
                    config.spec.head_hidden = value.parse().map_err(|_| bad())?;
                    head_hidden_set = true;
                }
                "bidirectional" => {
                    config.spec.bidirectional = value.parse().map_err(|_| bad())?
                }
                "epochs" => config.train.epochs = value.parse().map_err(|_| bad())?,
                "batch_size" => config.train.batch_budget = value.parse().map_err(|_| bad())?,
                "batch_unit" => {
                    config.train.batch_unit = match value.as_str() {
                        "tokens" => BatchUnit::Tokens,
                        "sentences" => BatchUnit::Sentences,
                        _ => return Err(bad()),
                    }
                }
                "learning_rate" => {
                    config.train.learning_rate = value.parse().map_err(|_| bad())?
                }
                "weight_decay" => config.train.weight_decay = value.parse().map_err(|_| bad())?,
                "grad_clip" => {
                    config.train.grad_clip = if value == "off" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad())?)
                    }
                }
                "seed" => config.train.seed = value.parse().map_err(|_| bad())?,
                "task_order" => {
                    config.train.task_order = match value.as_str() {
                        "ascending" => TaskOrder::Ascending,
                        "shuffled" => TaskOrder::Shuffled,
                        _ => return Err(bad()),
                    }
                }
                "validation_every" => {
                    config.train.validation_every = value.parse().map_err(|_| bad())?
                }
                "class_weights" => match value.as_str() {
                    "cr" => config.train.class_weights = ClassWeightTable::cr_default(),
                    "ner" => config.train.class_weights = ClassWeightTable::ner_default(),
                    "ner-flair" => {
                        config.train.class_weights = ClassWeightTable::ner_flair_default()
                    }
                    "uniform" => uniform_weights = true,
                    _ => return Err(bad()),
                },
                "embedding_file" => config.embedding_file = Some(PathBuf::from(value)),
                "embedding_trainable" => {
                    config.embedding_trainable = Some(value.parse().map_err(|_| bad())?)
                }
                "context_file" => config.context_file = Some(PathBuf::from(value)),
                "checkpoint" => config.checkpoint_path = PathBuf::from(value),
                "log" => config.log_path = PathBuf::from(value),
                _ => {
                    return Err(ConfigError::UnknownKey { line, key });
                }
            }
        }

        if !head_hidden_set {
            config.spec.head_hidden = (config.spec.hidden_dim / 2).max(1);
        }
        if uniform_weights {
            config.train.class_weights =
                ClassWeightTable::uniform(config.spec.max_len, config.spec.classes());
        }

        config.spec.validate().map_err(|e| ConfigError::Invalid {
            reason: e.to_string(),
        })?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cr_defaults_mirror_published_selection() {
        let c = RunConfig::defaults(TaskKind::Cr);
        assert_eq!(c.train.epochs, 30);
        assert_eq!(c.train.batch_budget, 20_000);
        assert_eq!(c.train.learning_rate, 0.001);
        assert_eq!(c.spec.lstm_layers, 1);
        assert_eq!(c.spec.hidden_dim, 500);
        assert_eq!(c.spec.lstm_dropout, 0.4);
        assert_eq!(c.spec.tagging_dropout, 0.4);
        assert_eq!(c.spec.input_dropout, 0.2);
        assert_eq!(c.spec.max_len, 7);
        assert_eq!(c.spec.embed_dim, 300);
    }

    #[test]
    fn ner_defaults_mirror_published_selection() {
        let c = RunConfig::defaults(TaskKind::Ner);
        assert_eq!(c.train.epochs, 140);
        assert_eq!(c.spec.lstm_layers, 2);
        assert_eq!(c.spec.max_len, 6);
        assert_eq!(c.spec.labels.len(), 5);
        let f = RunConfig::defaults(TaskKind::NerFlair);
        assert_eq!(f.train.batch_budget, 10_000);
        assert_eq!(f.spec.variant, Variant::NormFlair);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let c = RunConfig::parse(
            "# a comment\ntask=cr\nvariant=multi\nepochs=5\nseed=99\nhidden_dim=32 # inline\n",
        )
        .unwrap();
        assert_eq!(c.spec.variant, Variant::Multi);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.seed, 99);
        assert_eq!(c.spec.hidden_dim, 32);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("epoch=5\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 1,
                key: "epoch".into()
            }
        );
    }

    #[test]
    fn bad_values_name_line_and_key() {
        let err = RunConfig::parse("epochs=five\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 1, .. }));
        let err = RunConfig::parse("variant=bert\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn invalid_spec_combinations_are_rejected() {
        let err = RunConfig::parse("variant=input-drop\ninput_dropout=0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn task_key_applies_before_overrides_regardless_of_order() {
        let c = RunConfig::parse("epochs=3\ntask=ner\n").unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.spec.max_len, 6);
    }
}
