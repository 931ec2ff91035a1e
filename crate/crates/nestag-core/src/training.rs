//! Multi-task training: per-word-length class-weighted cross-entropy,
//! AdamW with decoupled weight decay, token-budget batching, and the
//! epoch loop with best-checkpoint selection on validation macro F1.
//!
//! Each word-length is a separate learning task with its own optimizer
//! state; a step for task `m` updates the sequence encoder (under
//! `Multi`: encoder `m`), tagging head `m`, and the embedding table when
//! it is trainable. All other heads stay bit-identical.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{Corpus, Sentence, Split};
use crate::evaluation::{evaluate, DocSpan};
use crate::fmath;
use crate::layers::Mode;
use crate::model::{ModelError, ModelSpec, PartlyLayeredNet};
use crate::numerics::{GradientTape, NumericsError, ParamId, ParamStore, Tensor, Value};
use crate::rng::{mix, Rng};
use crate::spancodec::{encode_bo, partition_by_max_len, CodecError, Span, Tag};

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    Numerics(NumericsError),
    Model(ModelError),
    Codec(CodecError),
    /// A target class index is outside the logit width.
    IndexOutOfRange { index: usize, bound: usize },
    TargetCountMismatch { expected: usize, got: usize },
    BadWeights { reason: String },
    NonFiniteGradient { param: String },
    SentenceExceedsBudget {
        sentence: String,
        tokens: usize,
        budget: usize,
    },
    InvalidBudget,
    EmptyCorpus,
    /// A gold span carries a label outside the model's label set.
    UnknownLabel { label: String },
}

impl From<NumericsError> for TrainError {
    fn from(e: NumericsError) -> Self {
        TrainError::Numerics(e)
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

impl From<CodecError> for TrainError {
    fn from(e: CodecError) -> Self {
        TrainError::Codec(e)
    }
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Numerics(e) => write!(f, "{e}"),
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Codec(e) => write!(f, "{e}"),
            TrainError::IndexOutOfRange { index, bound } => {
                write!(f, "target class {index} out of range (classes {bound})")
            }
            TrainError::TargetCountMismatch { expected, got } => {
                write!(f, "expected {expected} targets, got {got}")
            }
            TrainError::BadWeights { reason } => write!(f, "bad class weights: {reason}"),
            TrainError::NonFiniteGradient { param } => {
                write!(f, "non-finite gradient for parameter {param}")
            }
            TrainError::SentenceExceedsBudget {
                sentence,
                tokens,
                budget,
            } => write!(
                f,
                "sentence {sentence} has {tokens} tokens, exceeding the batch budget {budget}"
            ),
            TrainError::InvalidBudget => write!(f, "batch budget must be positive"),
            TrainError::EmptyCorpus => write!(f, "no training sentences"),
            TrainError::UnknownLabel { label } => {
                write!(f, "gold label {label:?} is not in the model's label set")
            }
        }
    }
}

impl core::error::Error for TrainError {}

/// Per-length, per-class loss weights. Class 0 is the O ("non") class;
/// classes `1..` follow the model's label order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassWeightTable {
    weights: Vec<Vec<f64>>,
}

/// Exact power of two `2^-k`.
fn pow2_neg(k: u32) -> f64 {
    1.0 / (1u64 << k) as f64
}

impl ClassWeightTable {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self, TrainError> {
        if weights.is_empty() {
            return Err(TrainError::BadWeights {
                reason: "no rows".into(),
            });
        }
        let classes = weights[0].len();
        for (m, row) in weights.iter().enumerate() {
            if row.len() != classes || classes < 2 {
                return Err(TrainError::BadWeights {
                    reason: alloc::format!("row {} has {} classes, expected {classes}", m + 1, row.len()),
                });
            }
            if row.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
                return Err(TrainError::BadWeights {
                    reason: alloc::format!("row {} has a non-positive weight", m + 1),
                });
            }
        }
        Ok(ClassWeightTable { weights })
    }

    pub fn uniform(max_len: usize, classes: usize) -> Self {
        ClassWeightTable {
            weights: alloc::vec![alloc::vec![1.0; classes]; max_len],
        }
    }

    /// Concept-recognition defaults: for lengths 1..=6 the concept weight
    /// is `1 - 2^-(m+1)` and the non-concept weight `2^-(m+1)`; length 7
    /// uses `1 - 2^-8` and `2^-9` (the published pair, which does not
    /// complement).
    pub fn cr_default() -> Self {
        let mut rows = Vec::with_capacity(7);
        for m in 1..=6u32 {
            rows.push(alloc::vec![pow2_neg(m + 1), 1.0 - pow2_neg(m + 1)]);
        }
        rows.push(alloc::vec![pow2_neg(9), 1.0 - pow2_neg(8)]);
        ClassWeightTable { weights: rows }
    }

    /// NER defaults, class order: non, Protein, DNA, RNA, CellLine,
    /// CellType. The same row applies to every length 1..=6.
    pub fn ner_default() -> Self {
        ClassWeightTable {
            weights: alloc::vec![alloc::vec![0.005, 0.20, 0.20, 0.30, 0.24, 0.21]; 6],
        }
    }

    /// NER defaults for the context-vector variant: the non weight decays
    /// with the length, entity weights are constant.
    pub fn ner_flair_default() -> Self {
        let non = [0.040, 0.030, 0.015, 0.010, 0.008, 0.006];
        let weights = non
            .iter()
            .map(|&n| alloc::vec![n, 0.15, 0.18, 0.25, 0.22, 0.20])
            .collect();
        ClassWeightTable { weights }
    }

    pub fn max_len(&self) -> usize {
        self.weights.len()
    }

    pub fn classes(&self) -> usize {
        self.weights[0].len()
    }

    /// Weight row for word-length `m` (1-based).
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m - 1]
    }

    pub fn get(&self, m: usize, class: usize) -> f64 {
        self.weights[m - 1][class]
    }
}

/// Class-weighted cross-entropy over one logit matrix.
///
/// `loss = Σ_t w[y_t] · (−log p_t[y_t]) / Σ_t w[y_t]`; with equal weights
/// this is the plain mean cross-entropy.
pub fn weighted_cross_entropy(
    tape: &mut GradientTape,
    logits: Value,
    targets: &[usize],
    weights: &[f64],
) -> Result<Value, TrainError> {
    let items = [(logits, targets)];
    weighted_cross_entropy_pooled(tape, &items, weights)
}

/// Pooled weighted cross-entropy over several logit matrices (a batch):
/// all tokens share one weighted mean.
pub fn weighted_cross_entropy_pooled(
    tape: &mut GradientTape,
    items: &[(Value, &[usize])],
    weights: &[f64],
) -> Result<Value, TrainError> {
    let mut denom = 0.0;
    for (logits, targets) in items {
        let t = tape.value(*logits);
        let (n, classes) = (t.rows(), t.cols());
        if weights.len() != classes {
            return Err(TrainError::BadWeights {
                reason: alloc::format!("{} weights for {classes} classes", weights.len()),
            });
        }
        if targets.len() != n {
            return Err(TrainError::TargetCountMismatch {
                expected: n,
                got: targets.len(),
            });
        }
        for &y in *targets {
            if y >= classes {
                return Err(TrainError::IndexOutOfRange {
                    index: y,
                    bound: classes,
                });
            }
            denom += weights[y];
        }
    }
    let mut total: Option<Value> = None;
    for (logits, targets) in items {
        let log_probs = tape.log_softmax_rows(*logits)?;
        let picks: Vec<(usize, usize)> = targets.iter().enumerate().map(|(t, &y)| (t, y)).collect();
        let picked = tape.pick(log_probs, &picks)?;
        let coeff: Vec<f64> = targets.iter().map(|&y| -weights[y] / denom).collect();
        let coeff_len = coeff.len();
        let coeff_value = tape.constant(
            Tensor::new(alloc::vec![coeff_len, 1], coeff).map_err(TrainError::Numerics)?,
        );
        let weighted = tape.mul(picked, coeff_value)?;
        let part = tape.sum(weighted)?;
        total = Some(match total {
            None => part,
            Some(acc) => tape.add(acc, part)?,
        });
    }
    total.ok_or(TrainError::EmptyCorpus)
}

/// AdamW hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Moments {
    m: Tensor,
    v: Tensor,
    step: u64,
}

/// Per-task AdamW state: first/second moments and a step counter for
/// every parameter the task updates.
#[derive(Clone, Debug)]
pub struct AdamWState {
    pub config: AdamWConfig,
    slots: BTreeMap<usize, Moments>,
}

impl AdamWState {
    pub fn new(config: AdamWConfig) -> Self {
        AdamWState {
            config,
            slots: BTreeMap::new(),
        }
    }
}

/// One AdamW update: biased moments, bias correction, and weight decay
/// decoupled from the adaptive term
/// (`θ ← θ·(1 − lr·λ) − lr·m̂/(√v̂ + ε)`).
pub fn adamw_step(
    store: &mut ParamStore,
    grads: &[(ParamId, Tensor)],
    state: &mut AdamWState,
) -> Result<(), TrainError> {
    let cfg = state.config;
    for (pid, grad) in grads {
        if grad.data().iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteGradient {
                param: store.name(*pid).to_string(),
            });
        }
        let param = store.get(*pid);
        if param.shape() != grad.shape() {
            return Err(TrainError::Numerics(NumericsError::ShapeMismatch {
                op: "adamw_step",
                lhs: param.shape().to_vec(),
                rhs: grad.shape().to_vec(),
            }));
        }
        let slot = state.slots.entry(pid.0).or_insert_with(|| Moments {
            m: Tensor::zeros(param.shape().to_vec()),
            v: Tensor::zeros(param.shape().to_vec()),
            step: 0,
        });
        slot.step += 1;
        let bias1 = 1.0 - libm_powi(cfg.beta1, slot.step);
        let bias2 = 1.0 - libm_powi(cfg.beta2, slot.step);
        let decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
        let mut updated = param.data().to_vec();
        for (k, g) in grad.data().iter().enumerate() {
            let m = cfg.beta1 * slot.m.data()[k] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * slot.v.data()[k] + (1.0 - cfg.beta2) * g * g;
            slot.m.data_mut()[k] = m;
            slot.v.data_mut()[k] = v;
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            updated[k] =
                updated[k] * decay - cfg.learning_rate * (m_hat / (fmath::sqrt(v_hat) + cfg.epsilon));
        }
        store
            .set(*pid, Tensor::new(param.shape().to_vec(), updated)?)
            .map_err(TrainError::Numerics)?;
    }
    Ok(())
}

fn libm_powi(base: f64, exp: u64) -> f64 {
    let mut result = 1.0;
    let mut base = base;
    let mut exp = exp;
    while exp > 0 {
        if exp & 1 == 1 {
            result *= base;
        }
        base *= base;
        exp >>= 1;
    }
    result
}

/// Scales all gradients so their global L2 norm does not exceed
/// `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [(ParamId, Tensor)], max_norm: f64) -> f64 {
    let sq: f64 = grads
        .iter()
        .map(|(_, g)| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = fmath::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for (_, g) in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

/// How the batch budget is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchUnit {
    Tokens,
    Sentences,
}

/// Order in which the per-length tasks run within a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskOrder {
    Ascending,
    Shuffled,
}

/// Training-loop settings. Defaults mirror the published selections; the
/// batch budget counts tokens unless configured otherwise.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_budget: usize,
    pub batch_unit: BatchUnit,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Global-norm gradient clip; `None` disables.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    pub class_weights: ClassWeightTable,
    pub task_order: TaskOrder,
    /// Validate (and possibly checkpoint) every this many epochs.
    pub validation_every: usize,
}

impl TrainConfig {
    /// Concept-recognition LSTM selection: 30 epochs, 20k-token batches,
    /// learning rate 0.001.
    pub fn cr_lstm() -> Self {
        TrainConfig {
            epochs: 30,
            batch_budget: 20_000,
            batch_unit: BatchUnit::Tokens,
            learning_rate: 0.001,
            weight_decay: 0.0,
            grad_clip: Some(5.0),
            seed: 1,
            class_weights: ClassWeightTable::cr_default(),
            task_order: TaskOrder::Ascending,
            validation_every: 1,
        }
    }

    /// NER LSTM selection: 140 epochs, 20k-token batches.
    pub fn ner_lstm() -> Self {
        TrainConfig {
            epochs: 140,
            batch_budget: 20_000,
            batch_unit: BatchUnit::Tokens,
            learning_rate: 0.001,
            weight_decay: 0.0,
            grad_clip: Some(5.0),
            seed: 1,
            class_weights: ClassWeightTable::ner_default(),
            task_order: TaskOrder::Ascending,
            validation_every: 1,
        }
    }
}

/// Shuffles sentences (seeded) and packs them greedily until adding the
/// next sentence would exceed the budget. Sentences are never split.
/// Returns batches of indices into `sentences`.
pub fn make_batches(
    sentences: &[&Sentence],
    budget: usize,
    unit: BatchUnit,
    seed: u64,
) -> Result<Vec<Vec<usize>>, TrainError> {
    if budget == 0 {
        return Err(TrainError::InvalidBudget);
    }
    if unit == BatchUnit::Tokens {
        for s in sentences {
            if s.len() > budget {
                return Err(TrainError::SentenceExceedsBudget {
                    sentence: s.id.clone(),
                    tokens: s.len(),
                    budget,
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    Rng::new(seed).shuffle(&mut order);
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut used = 0usize;
    for idx in order {
        let cost = match unit {
            BatchUnit::Tokens => sentences[idx].len(),
            BatchUnit::Sentences => 1,
        };
        if !current.is_empty() && used + cost > budget {
            batches.push(core::mem::take(&mut current));
            used = 0;
        }
        current.push(idx);
        used += cost;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

/// A sentence with its per-task target class indices
/// (`targets[m-1][token]`, 0 = O, `1+i` = begin of label `i`).
#[derive(Clone, Debug)]
pub struct PreparedSentence<'a> {
    pub sentence: &'a Sentence,
    pub targets: Vec<Vec<usize>>,
}

/// Sentences with targets, plus the over-long spans left out of them.
pub type PreparedCorpus<'a> = (Vec<PreparedSentence<'a>>, Vec<(String, Span)>);

/// Builds training targets for every sentence. Spans longer than the
/// model's maximum word-length cannot be encoded; they are dropped from
/// the targets and reported back for warning.
pub fn prepare_sentences<'a>(
    sentences: impl IntoIterator<Item = &'a Sentence>,
    spec: &ModelSpec,
) -> Result<PreparedCorpus<'a>, TrainError> {
    let label_index: BTreeMap<&str, usize> = spec
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut prepared = Vec::new();
    let mut dropped = Vec::new();
    for sentence in sentences {
        for span in &sentence.spans {
            if !label_index.contains_key(span.label.as_str()) {
                return Err(TrainError::UnknownLabel {
                    label: span.label.clone(),
                });
            }
        }
        let (kept, over) = partition_by_max_len(&sentence.spans, spec.max_len);
        dropped.extend(over.into_iter().map(|s| (sentence.id.clone(), s)));
        let rows = encode_bo(&kept, sentence.len(), spec.max_len)?;
        let targets = rows
            .iter()
            .map(|row| {
                row.tags
                    .iter()
                    .map(|tag| match tag {
                        Tag::Outside => 0,
                        Tag::Begin(label) => 1 + label_index[label.as_str()],
                    })
                    .collect()
            })
            .collect();
        prepared.push(PreparedSentence { sentence, targets });
    }
    Ok((prepared, dropped))
}

/// Validation scores recorded per epoch: macro over word-lengths, micro
/// pooled.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ValidationScores {
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss per task over the epoch, in word-length order.
    pub task_losses: Vec<f64>,
    pub validation: Option<ValidationScores>,
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    /// Epoch and macro F1 of the best validation score, if any epoch was
    /// validated.
    pub best: Option<(usize, f64)>,
    /// Gold spans that exceeded the model's maximum word-length and were
    /// left out of the training targets.
    pub dropped_spans: Vec<(String, Span)>,
}

/// Runs eval-mode inference over sentences and decodes predicted spans.
pub fn predict_spans(
    net: &PartlyLayeredNet,
    sentences: &[&Sentence],
) -> Result<Vec<DocSpan>, ModelError> {
    let mut out = Vec::new();
    for (i, sentence) in sentences.iter().enumerate() {
        let logits = net.infer(&sentence.tokens, sentence.context.as_ref())?;
        let tags = net.predict_tags(&logits);
        for span in crate::spancodec::decode_spans(&tags) {
            out.push(DocSpan::new(i, span));
        }
    }
    Ok(out)
}

/// Gold spans of a sentence list, anchored by position.
pub fn gold_spans(sentences: &[&Sentence]) -> Vec<DocSpan> {
    let mut out = Vec::new();
    for (i, sentence) in sentences.iter().enumerate() {
        for span in &sentence.spans {
            out.push(DocSpan::new(i, span.clone()));
        }
    }
    out
}

/// Owns the per-task optimizer states and the dropout stream for one
/// training run.
pub struct Trainer {
    config: TrainConfig,
    optimizers: Vec<AdamWState>,
    rng: Rng,
}

impl Trainer {
    pub fn new(net: &PartlyLayeredNet, config: TrainConfig) -> Result<Self, TrainError> {
        let spec = net.spec();
        if config.class_weights.max_len() < spec.max_len {
            return Err(TrainError::BadWeights {
                reason: alloc::format!(
                    "weight table covers lengths up to {}, model needs {}",
                    config.class_weights.max_len(),
                    spec.max_len
                ),
            });
        }
        if config.class_weights.classes() != spec.classes() {
            return Err(TrainError::BadWeights {
                reason: alloc::format!(
                    "weight table has {} classes, model has {}",
                    config.class_weights.classes(),
                    spec.classes()
                ),
            });
        }
        let adamw = AdamWConfig {
            learning_rate: config.learning_rate,
            weight_decay: config.weight_decay,
            ..AdamWConfig::default()
        };
        let optimizers = (0..spec.max_len).map(|_| AdamWState::new(adamw)).collect();
        let rng = Rng::derive(config.seed, 0x5eed);
        Ok(Trainer {
            config,
            optimizers,
            rng,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One update for task `task` (0-based word-length index) on a batch:
    /// pooled weighted cross-entropy, backward, clip, AdamW on the task's
    /// parameters only. Returns the batch loss.
    pub fn train_step(
        &mut self,
        net: &mut PartlyLayeredNet,
        batch: &[&PreparedSentence<'_>],
        task: usize,
    ) -> Result<f64, TrainError> {
        if batch.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let mut tape = GradientTape::new();
        let mut items: Vec<(Value, &[usize])> = Vec::with_capacity(batch.len());
        for prepared in batch {
            let sentence = prepared.sentence;
            let logits = net.forward_task(
                &mut tape,
                &sentence.tokens,
                sentence.context.as_ref(),
                task,
                Mode::Train,
                &mut self.rng,
            )?;
            items.push((logits, prepared.targets[task].as_slice()));
        }
        let weights = self.config.class_weights.row(task + 1).to_vec();
        let loss = weighted_cross_entropy_pooled(&mut tape, &items, &weights)?;
        let loss_value = tape.value(loss).data()[0];
        tape.backward(loss)?;

        let mut grads: Vec<(ParamId, Tensor)> = Vec::new();
        for pid in net.task_param_ids(task) {
            if let Some(g) = tape.param_grad(pid) {
                grads.push((pid, g.clone()));
            }
        }
        if let Some(max_norm) = self.config.grad_clip {
            clip_global_norm(&mut grads, max_norm);
        }
        adamw_step(net.store_mut(), &grads, &mut self.optimizers[task])?;
        Ok(loss_value)
    }

    /// Full training loop: per epoch, seeded shuffled batches, one
    /// train_step per task per batch (ascending by default), validation
    /// on the dev split, and `on_checkpoint` whenever the validation
    /// macro F1 improves. With zero epochs the net is returned untouched
    /// and no checkpoint is written.
    pub fn train<F>(
        &mut self,
        net: &mut PartlyLayeredNet,
        corpus: &Corpus,
        mut on_checkpoint: F,
    ) -> Result<TrainOutcome, TrainError>
    where
        F: FnMut(&PartlyLayeredNet, usize, f64),
    {
        let train_sentences: Vec<&Sentence> = corpus.split(Split::Train).collect();
        if train_sentences.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let (prepared, dropped) = prepare_sentences(train_sentences.iter().copied(), net.spec())?;
        let dev_sentences: Vec<&Sentence> = corpus.split(Split::Dev).collect();
        let dev_gold = gold_spans(&dev_sentences);

        let tasks = net.num_tasks();
        let mut log = Vec::with_capacity(self.config.epochs);
        let mut best: Option<(usize, f64)> = None;

        for epoch in 1..=self.config.epochs {
            let refs: Vec<&Sentence> = prepared.iter().map(|p| p.sentence).collect();
            let batches = make_batches(
                &refs,
                self.config.batch_budget,
                self.config.batch_unit,
                mix(self.config.seed, epoch as u64),
            )?;
            let mut loss_sums = alloc::vec![0.0; tasks];
            let mut steps = 0usize;
            for batch_indices in &batches {
                let batch: Vec<&PreparedSentence> =
                    batch_indices.iter().map(|&i| &prepared[i]).collect();
                let mut order: Vec<usize> = (0..tasks).collect();
                if self.config.task_order == TaskOrder::Shuffled {
                    self.rng.shuffle(&mut order);
                }
                for &task in &order {
                    loss_sums[task] += self.train_step(net, &batch, task)?;
                }
                steps += 1;
            }
            let task_losses: Vec<f64> = loss_sums
                .iter()
                .map(|s| if steps > 0 { s / steps as f64 } else { 0.0 })
                .collect();

            let validation = if !dev_sentences.is_empty()
                && self.config.validation_every > 0
                && epoch % self.config.validation_every == 0
            {
                let predicted = predict_spans(net, &dev_sentences)?;
                let report = evaluate(&dev_gold, &predicted, &net.spec().labels);
                Some(ValidationScores {
                    macro_p: report.macro_scores.precision,
                    macro_r: report.macro_scores.recall,
                    macro_f1: report.macro_scores.f1,
                    micro_p: report.micro.precision(),
                    micro_r: report.micro.recall(),
                    micro_f1: report.micro.f1(),
                })
            } else {
                None
            };

            if let Some(v) = &validation {
                let improved = best.map(|(_, f1)| v.macro_f1 > f1).unwrap_or(true);
                if improved {
                    best = Some((epoch, v.macro_f1));
                    on_checkpoint(net, epoch, v.macro_f1);
                }
            }
            log.push(EpochRecord {
                epoch,
                task_losses,
                validation,
            });
        }
        Ok(TrainOutcome {
            log,
            best,
            dropped_spans: dropped,
        })
    }
}
