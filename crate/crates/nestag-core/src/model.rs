//! The partly-layered tagging network: one shared sequence encoder (or
//! one per word-length in the fully-dedicated variant) feeding a stack of
//! per-word-length tagging heads.
//!
//! Head `m` emits, for every token, logits over `{O} ∪ {B-label}`: does a
//! span of exactly `m` tokens begin here, and with which label. Sharing
//! the encoder lets rare long spans profit from what the abundant short
//! ones teach it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::layers::{
    dense, dropout, embed, layer_norm, lstm_forward, DenseParams, EmbeddingTable, LayerError,
    LstmStack, Mode, NormParams, Vocab, PAD_TOKEN, UNK_TOKEN,
};
use crate::numerics::{GradientTape, NumericsError, ParamId, ParamStore, Tensor, Value};
use crate::rng::Rng;
use crate::spancodec::{Tag, TagSequence};

/// Architecture variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// LSTM encoder, dropout+dense heads.
    Base,
    /// Dropout on the embedded input before the LSTM.
    InputDrop,
    /// Layer normalization after the LSTM.
    Norm,
    /// Normalized encoder, two dense layers per head, and precomputed
    /// context vectors concatenated to the word embeddings.
    NormFlair,
    /// One dedicated encoder per word-length instead of a shared one.
    Multi,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::InputDrop => "input-drop",
            Variant::Norm => "norm",
            Variant::NormFlair => "norm-flair",
            Variant::Multi => "multi",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "base" => Some(Variant::Base),
            "input-drop" => Some(Variant::InputDrop),
            "norm" => Some(Variant::Norm),
            "norm-flair" => Some(Variant::NormFlair),
            "multi" => Some(Variant::Multi),
            _ => None,
        }
    }

    fn uses_norm(&self) -> bool {
        matches!(self, Variant::Norm | Variant::NormFlair)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Architecture and hyperparameters of a [`PartlyLayeredNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Maximum span word-length; one tagging head per length `1..=max_len`.
    pub max_len: usize,
    /// Ordered entity labels; head outputs are `{O} ∪ {B-label}`.
    pub labels: Vec<String>,
    pub embed_dim: usize,
    /// Width of precomputed context vectors (0 = none).
    pub context_dim: usize,
    pub lstm_layers: usize,
    pub hidden_dim: usize,
    /// Dropout between stacked LSTM layers.
    pub lstm_dropout: f64,
    /// Dropout inside each tagging head.
    pub tagging_dropout: f64,
    /// Dropout on the embedded input (used by `InputDrop`).
    pub input_dropout: f64,
    /// Inner dense width of two-dense heads (`NormFlair`).
    pub head_hidden: usize,
    /// Run the encoder in both directions and concatenate.
    pub bidirectional: bool,
}

impl ModelSpec {
    /// Concept-recognition defaults: binary label, spans up to 7 words.
    pub fn cr(variant: Variant) -> Self {
        ModelSpec {
            variant,
            max_len: 7,
            labels: alloc::vec!["Concept".to_string()],
            embed_dim: 300,
            context_dim: 0,
            lstm_layers: 1,
            hidden_dim: 500,
            lstm_dropout: 0.4,
            tagging_dropout: 0.4,
            input_dropout: 0.2,
            head_hidden: 250,
            bidirectional: false,
        }
    }

    /// Biomedical NER defaults: five labels, spans up to 6 words.
    pub fn ner(variant: Variant) -> Self {
        ModelSpec {
            variant,
            max_len: 6,
            labels: ["Protein", "DNA", "RNA", "CellLine", "CellType"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            embed_dim: 300,
            context_dim: if variant == Variant::NormFlair { 100 } else { 0 },
            lstm_layers: 2,
            hidden_dim: 500,
            lstm_dropout: 0.4,
            tagging_dropout: 0.4,
            input_dropout: 0.2,
            head_hidden: 250,
            bidirectional: false,
        }
    }

    /// Tag classes per head: O plus one begin class per label.
    pub fn classes(&self) -> usize {
        1 + self.labels.len()
    }

    fn encoder_output_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_dim
        } else {
            self.hidden_dim
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: String| Err(ModelError::InvalidSpec { reason });
        if self.max_len == 0 {
            return fail("max_len must be at least 1".into());
        }
        if self.labels.is_empty() {
            return fail("label set must be nonempty".into());
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for l in &self.labels {
            if l.is_empty() || !seen.insert(l) {
                return fail(format!("label set has empty or duplicate entry {l:?}"));
            }
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.lstm_layers == 0 {
            return fail("embed_dim, hidden_dim and lstm_layers must be positive".into());
        }
        for (name, rate) in [
            ("lstm_dropout", self.lstm_dropout),
            ("tagging_dropout", self.tagging_dropout),
            ("input_dropout", self.input_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return fail(format!("{name} {rate} not in [0, 1)"));
            }
        }
        if self.variant == Variant::InputDrop && self.input_dropout == 0.0 {
            return fail("input-drop variant requires a nonzero input dropout rate".into());
        }
        if self.variant == Variant::NormFlair {
            if self.head_hidden == 0 {
                return fail("norm-flair variant requires head_hidden >= 1".into());
            }
            if self.context_dim == 0 {
                return fail("norm-flair variant requires a context-vector source".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Layer(LayerError),
    InvalidSpec { reason: String },
    /// Stored parameters do not match the declared spec.
    SpecMismatch { reason: String },
    EmptySentence,
    MissingContext,
    ContextDimMismatch { expected: usize, got: usize },
}

impl From<LayerError> for ModelError {
    fn from(e: LayerError) -> Self {
        ModelError::Layer(e)
    }
}

impl From<NumericsError> for ModelError {
    fn from(e: NumericsError) -> Self {
        ModelError::Layer(LayerError::Numerics(e))
    }
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Layer(e) => write!(f, "{e}"),
            ModelError::InvalidSpec { reason } => write!(f, "invalid model spec: {reason}"),
            ModelError::SpecMismatch { reason } => write!(f, "spec mismatch: {reason}"),
            ModelError::EmptySentence => write!(f, "cannot run on an empty sentence"),
            ModelError::MissingContext => {
                write!(f, "model expects context vectors but none were supplied")
            }
            ModelError::ContextDimMismatch { expected, got } => {
                write!(f, "context vectors have width {got}, expected {expected}")
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// One sequence encoder: forward LSTM stack, optional backward stack,
/// optional layer norm.
#[derive(Clone, Debug)]
struct SeqEncoder {
    fwd: LstmStack,
    bwd: Option<LstmStack>,
    norm: Option<NormParams>,
}

impl SeqEncoder {
    fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.fwd.param_ids();
        if let Some(bwd) = &self.bwd {
            ids.extend(bwd.param_ids());
        }
        if let Some(norm) = &self.norm {
            ids.push(norm.gain);
            ids.push(norm.bias);
        }
        ids
    }
}

/// One per-word-length tagging head: dropout plus one or two dense layers.
#[derive(Clone, Debug)]
struct TaggingHead {
    dense1: DenseParams,
    dense2: Option<DenseParams>,
}

impl TaggingHead {
    fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = alloc::vec![self.dense1.weight, self.dense1.bias];
        if let Some(d2) = &self.dense2 {
            ids.push(d2.weight);
            ids.push(d2.bias);
        }
        ids
    }
}

/// How to initialize the embedding table.
pub enum EmbeddingInit {
    /// Random vectors over the given vocabulary; trainable.
    Random { tokens: Vec<String> },
    /// Pretrained vectors; frozen unless `trainable` is set.
    Pretrained {
        entries: Vec<(String, Vec<f64>)>,
        trainable: bool,
    },
}

/// The assembled network: embedding, encoder(s), and `max_len` heads.
#[derive(Clone, Debug)]
pub struct PartlyLayeredNet {
    spec: ModelSpec,
    store: ParamStore,
    embedding: EmbeddingTable,
    encoders: Vec<SeqEncoder>,
    heads: Vec<TaggingHead>,
}

impl PartlyLayeredNet {
    pub fn new(spec: ModelSpec, init: EmbeddingInit, rng: &mut Rng) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut store = ParamStore::new();
        let embedding = match init {
            EmbeddingInit::Random { tokens } => {
                EmbeddingTable::random(&mut store, tokens, spec.embed_dim, rng)
            }
            EmbeddingInit::Pretrained { entries, trainable } => {
                EmbeddingTable::from_pretrained(&mut store, &entries, spec.embed_dim, trainable)?
            }
        };
        Ok(Self::build(spec, store, embedding, rng))
    }

    fn build(
        spec: ModelSpec,
        mut store: ParamStore,
        embedding: EmbeddingTable,
        rng: &mut Rng,
    ) -> Self {
        let input_dim = spec.embed_dim + spec.context_dim;
        let encoder_count = if spec.variant == Variant::Multi {
            spec.max_len
        } else {
            1
        };
        let mut encoders = Vec::with_capacity(encoder_count);
        for e in 0..encoder_count {
            let fwd = LstmStack::init(
                &mut store,
                &format!("seq{e}.fwd"),
                input_dim,
                spec.hidden_dim,
                spec.lstm_layers,
                spec.lstm_dropout,
                rng,
            );
            let bwd = spec.bidirectional.then(|| {
                LstmStack::init(
                    &mut store,
                    &format!("seq{e}.bwd"),
                    input_dim,
                    spec.hidden_dim,
                    spec.lstm_layers,
                    spec.lstm_dropout,
                    rng,
                )
            });
            let norm = spec
                .variant
                .uses_norm()
                .then(|| NormParams::init(&mut store, &format!("seq{e}.norm"), spec.encoder_output_dim()));
            encoders.push(SeqEncoder { fwd, bwd, norm });
        }
        let mut heads = Vec::with_capacity(spec.max_len);
        for m in 1..=spec.max_len {
            let enc_dim = spec.encoder_output_dim();
            let (dense1, dense2) = if spec.variant == Variant::NormFlair {
                let d1 = DenseParams::init(&mut store, &format!("head{m}.dense1"), enc_dim, spec.head_hidden, rng);
                let d2 = DenseParams::init(
                    &mut store,
                    &format!("head{m}.dense2"),
                    spec.head_hidden,
                    spec.classes(),
                    rng,
                );
                (d1, Some(d2))
            } else {
                (
                    DenseParams::init(&mut store, &format!("head{m}.dense1"), enc_dim, spec.classes(), rng),
                    None,
                )
            };
            heads.push(TaggingHead { dense1, dense2 });
        }
        PartlyLayeredNet {
            spec,
            store,
            embedding,
            encoders,
            heads,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn vocab(&self) -> &Vocab {
        &self.embedding.vocab
    }

    pub fn embedding_trainable(&self) -> bool {
        self.embedding.trainable
    }

    /// Freezes or unfreezes the embedding table for training.
    pub fn set_embedding_trainable(&mut self, trainable: bool) {
        self.embedding.trainable = trainable;
    }

    /// Number of learning tasks (= number of heads = `max_len`).
    pub fn num_tasks(&self) -> usize {
        self.spec.max_len
    }

    fn encoder_index(&self, task: usize) -> usize {
        if self.spec.variant == Variant::Multi {
            task
        } else {
            0
        }
    }

    /// Parameters of tagging head `m` (0-based task index).
    pub fn head_param_ids(&self, task: usize) -> Vec<ParamId> {
        self.heads[task].param_ids()
    }

    /// Parameters of sequence encoder `k` (always 0 unless `Multi`).
    pub fn encoder_param_ids(&self, k: usize) -> Vec<ParamId> {
        self.encoders[k].param_ids()
    }

    pub fn num_encoders(&self) -> usize {
        self.encoders.len()
    }

    /// Parameters task `m` is allowed to update: its encoder (the shared
    /// one, or its own under `Multi`), its head, and the embedding table
    /// when trainable.
    pub fn task_param_ids(&self, task: usize) -> Vec<ParamId> {
        let mut ids = Vec::new();
        if self.embedding.trainable {
            ids.push(self.embedding.vectors);
        }
        ids.extend(self.encoder_param_ids(self.encoder_index(task)));
        ids.extend(self.head_param_ids(task));
        ids
    }

    fn encode(
        &self,
        tape: &mut GradientTape,
        encoder: usize,
        tokens: &[String],
        context: Option<&Tensor>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Value, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        let context = match (self.spec.context_dim, context) {
            (0, _) => None,
            (_, None) => return Err(ModelError::MissingContext),
            (dim, Some(ctx)) => {
                if ctx.cols() != dim {
                    return Err(ModelError::ContextDimMismatch {
                        expected: dim,
                        got: ctx.cols(),
                    });
                }
                Some(ctx)
            }
        };
        let mut x = embed(tape, &self.store, &self.embedding, tokens, context)?;
        if self.spec.variant == Variant::InputDrop {
            x = dropout(tape, x, self.spec.input_dropout, mode, rng)?;
        }
        let enc = &self.encoders[encoder];
        let mut hidden = lstm_forward(tape, &self.store, &enc.fwd, x, mode, rng)?;
        if let Some(bwd) = &enc.bwd {
            let n = tokens.len();
            let reversed: Vec<usize> = (0..n).rev().collect();
            let x_rev = tape.gather_rows(x, &reversed)?;
            let h_rev = lstm_forward(tape, &self.store, bwd, x_rev, mode, rng)?;
            let h_bwd = tape.gather_rows(h_rev, &reversed)?;
            hidden = tape.concat_cols(hidden, h_bwd)?;
        }
        if let Some(norm) = &enc.norm {
            hidden = layer_norm(tape, &self.store, norm, hidden)?;
        }
        Ok(hidden)
    }

    fn head_forward(
        &self,
        tape: &mut GradientTape,
        task: usize,
        hidden: Value,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Value, ModelError> {
        let head = &self.heads[task];
        let dropped = dropout(tape, hidden, self.spec.tagging_dropout, mode, rng)?;
        let mut logits = dense(tape, &self.store, &head.dense1, dropped)?;
        if let Some(d2) = &head.dense2 {
            let activated = tape.relu(logits)?;
            logits = dense(tape, &self.store, d2, activated)?;
        }
        Ok(logits)
    }

    /// Runs the network for every word-length, returning one `[n, classes]`
    /// logit value per head in length order.
    pub fn forward(
        &self,
        tape: &mut GradientTape,
        tokens: &[String],
        context: Option<&Tensor>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Vec<Value>, ModelError> {
        let mut outputs = Vec::with_capacity(self.spec.max_len);
        if self.spec.variant == Variant::Multi {
            for task in 0..self.spec.max_len {
                let hidden = self.encode(tape, task, tokens, context, mode, rng)?;
                outputs.push(self.head_forward(tape, task, hidden, mode, rng)?);
            }
        } else {
            let hidden = self.encode(tape, 0, tokens, context, mode, rng)?;
            for task in 0..self.spec.max_len {
                outputs.push(self.head_forward(tape, task, hidden, mode, rng)?);
            }
        }
        Ok(outputs)
    }

    /// Runs only task `m`'s path (its encoder and head).
    pub fn forward_task(
        &self,
        tape: &mut GradientTape,
        tokens: &[String],
        context: Option<&Tensor>,
        task: usize,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Value, ModelError> {
        let hidden = self.encode(tape, self.encoder_index(task), tokens, context, mode, rng)?;
        self.head_forward(tape, task, hidden, mode, rng)
    }

    /// Eval-mode forward returning plain logit tensors.
    pub fn infer(
        &self,
        tokens: &[String],
        context: Option<&Tensor>,
    ) -> Result<Vec<Tensor>, ModelError> {
        let mut tape = GradientTape::new();
        // eval mode draws nothing from the generator
        let mut rng = Rng::new(0);
        let values = self.forward(&mut tape, tokens, context, Mode::Eval, &mut rng)?;
        Ok(values.iter().map(|&v| tape.value(v).clone()).collect())
    }

    /// Argmax decoding of per-head logits into BO tag rows.
    ///
    /// Ties break toward O, then toward the earlier label. Positions where
    /// a length-`m` span could not fit (`i + m > n`) are forced to O so
    /// every row satisfies the tag-sequence invariant.
    pub fn predict_tags(&self, logits: &[Tensor]) -> Vec<TagSequence> {
        let mut rows = Vec::with_capacity(logits.len());
        for (mi, head_logits) in logits.iter().enumerate() {
            let m = mi + 1;
            let n = head_logits.rows();
            let classes = head_logits.cols();
            let mut tags = Vec::with_capacity(n);
            for i in 0..n {
                if i + m > n {
                    tags.push(Tag::Outside);
                    continue;
                }
                let mut best = 0;
                for c in 1..classes {
                    if head_logits.get(i, c) > head_logits.get(i, best) {
                        best = c;
                    }
                }
                if best == 0 {
                    tags.push(Tag::Outside);
                } else {
                    tags.push(Tag::Begin(self.spec.labels[best - 1].clone()));
                }
            }
            rows.push(TagSequence { word_len: m, tags });
        }
        rows
    }

    /// Reassembles a network from checkpoint parts. The parameter list
    /// must match the layout this spec prescribes exactly (names, order
    /// and shapes); the vocabulary must carry the reserved entries.
    pub fn from_parts(
        spec: ModelSpec,
        vocab_tokens: Vec<String>,
        embedding_trainable: bool,
        params: Vec<(String, Tensor)>,
    ) -> Result<Self, ModelError> {
        spec.validate()?;
        if vocab_tokens.first().map(String::as_str) != Some(UNK_TOKEN)
            || vocab_tokens.get(1).map(String::as_str) != Some(PAD_TOKEN)
        {
            return Err(ModelError::SpecMismatch {
                reason: "vocabulary must start with the reserved <unk> and <pad> entries".into(),
            });
        }
        // Build the expected layout with placeholder values, then overwrite.
        let mut rng = Rng::new(0);
        let mut store = ParamStore::new();
        let embedding = EmbeddingTable::random(
            &mut store,
            vocab_tokens.iter().skip(2).cloned(),
            spec.embed_dim,
            &mut rng,
        );
        if embedding.vocab.len() != vocab_tokens.len() {
            return Err(ModelError::SpecMismatch {
                reason: "vocabulary contains duplicate or reserved tokens".into(),
            });
        }
        let mut net = Self::build(spec, store, embedding, &mut rng);
        net.embedding.trainable = embedding_trainable;
        if params.len() != net.store.len() {
            return Err(ModelError::SpecMismatch {
                reason: format!(
                    "expected {} parameter arrays, found {}",
                    net.store.len(),
                    params.len()
                ),
            });
        }
        for (i, (name, tensor)) in params.into_iter().enumerate() {
            let id = ParamId(i);
            if net.store.name(id) != name {
                return Err(ModelError::SpecMismatch {
                    reason: format!("parameter {i}: expected {:?}, found {name:?}", net.store.name(id)),
                });
            }
            if net.store.get(id).shape() != tensor.shape() {
                return Err(ModelError::SpecMismatch {
                    reason: format!(
                        "parameter {name}: expected shape {:?}, found {:?}",
                        net.store.get(id).shape(),
                        tensor.shape()
                    ),
                });
            }
            net.store.set(id, tensor).map_err(|e| ModelError::SpecMismatch {
                reason: format!("parameter {name}: {e}"),
            })?;
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_spec(variant: Variant) -> ModelSpec {
        ModelSpec {
            variant,
            max_len: 3,
            labels: vec!["Concept".to_string()],
            embed_dim: 4,
            context_dim: 0,
            lstm_layers: 1,
            hidden_dim: 5,
            lstm_dropout: 0.0,
            tagging_dropout: 0.2,
            input_dropout: 0.1,
            head_hidden: 3,
            bidirectional: false,
        }
    }

    fn words(ts: &[&str]) -> Vec<String> {
        ts.iter().map(|t| t.to_string()).collect()
    }

    fn small_net(variant: Variant) -> PartlyLayeredNet {
        let mut rng = Rng::new(9);
        PartlyLayeredNet::new(
            small_spec(variant),
            EmbeddingInit::Random {
                tokens: words(&["a", "b", "c"]),
            },
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn forward_shapes_match_contract() {
        let net = small_net(Variant::Base);
        let logits = net.infer(&words(&["a", "b", "c"]), None).unwrap();
        assert_eq!(logits.len(), 3);
        for l in &logits {
            assert_eq!(l.shape(), &[3, 2]);
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let net = small_net(Variant::InputDrop);
        let a = net.infer(&words(&["a", "c"]), None).unwrap();
        let b = net.infer(&words(&["a", "c"]), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_sentence_is_rejected() {
        let net = small_net(Variant::Base);
        assert_eq!(net.infer(&[], None).unwrap_err(), ModelError::EmptySentence);
    }

    #[test]
    fn multi_variant_has_one_encoder_per_length() {
        let net = small_net(Variant::Multi);
        assert_eq!(net.num_encoders(), 3);
        let shared = small_net(Variant::Base);
        assert_eq!(shared.num_encoders(), 1);
    }

    #[test]
    fn head_widths_match_labels() {
        let mut spec = small_spec(Variant::Base);
        spec.labels = vec!["Protein".into(), "DNA".into()];
        let mut rng = Rng::new(1);
        let net = PartlyLayeredNet::new(
            spec,
            EmbeddingInit::Random { tokens: words(&["x"]) },
            &mut rng,
        )
        .unwrap();
        let logits = net.infer(&words(&["x", "x"]), None).unwrap();
        for l in &logits {
            assert_eq!(l.cols(), 3);
        }
    }

    #[test]
    fn predict_tags_all_outside_and_tiebreak() {
        let net = small_net(Variant::Base);
        // logits favoring O everywhere
        let favor_o = Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        // exact tie resolves to O
        let tie = Tensor::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let rows = net.predict_tags(&[favor_o, tie.clone(), tie]);
        for row in &rows {
            assert!(row.tags.iter().all(|t| *t == Tag::Outside));
        }
    }

    #[test]
    fn predict_tags_forces_outside_where_span_cannot_fit() {
        let net = small_net(Variant::Base);
        let favor_b = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let rows = net.predict_tags(&[favor_b.clone(), favor_b.clone(), favor_b]);
        // row m=2: B allowed at 0..=1; row m=3: only at 0
        assert_eq!(rows[1].tags[2], Tag::Outside);
        assert_eq!(rows[2].tags[1], Tag::Outside);
        assert_eq!(rows[2].tags[2], Tag::Outside);
        assert!(matches!(rows[2].tags[0], Tag::Begin(_)));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec(Variant::Base);
        spec.labels = vec![];
        assert!(spec.validate().is_err());

        let mut spec = small_spec(Variant::InputDrop);
        spec.input_dropout = 0.0;
        assert!(spec.validate().is_err());

        let mut spec = small_spec(Variant::NormFlair);
        spec.context_dim = 0;
        assert!(spec.validate().is_err());

        let mut spec = small_spec(Variant::Base);
        spec.labels = vec!["A".into(), "A".into()];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn norm_flair_requires_context_at_forward() {
        let mut spec = small_spec(Variant::NormFlair);
        spec.context_dim = 2;
        let mut rng = Rng::new(3);
        let net = PartlyLayeredNet::new(
            spec,
            EmbeddingInit::Random { tokens: words(&["a"]) },
            &mut rng,
        )
        .unwrap();
        assert_eq!(
            net.infer(&words(&["a"]), None).unwrap_err(),
            ModelError::MissingContext
        );
        let ctx = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(
            net.infer(&words(&["a"]), Some(&ctx)).unwrap_err(),
            ModelError::ContextDimMismatch { expected: 2, got: 3 }
        );
        let ctx = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let logits = net.infer(&words(&["a"]), Some(&ctx)).unwrap();
        assert_eq!(logits.len(), 3);
    }

    #[test]
    fn from_parts_roundtrip_is_bitwise() {
        let net = small_net(Variant::Norm);
        let params: Vec<(String, Tensor)> = net
            .store()
            .iter()
            .map(|(_, name, t)| (name.to_string(), t.clone()))
            .collect();
        let rebuilt = PartlyLayeredNet::from_parts(
            net.spec().clone(),
            net.vocab().tokens().to_vec(),
            net.embedding_trainable(),
            params,
        )
        .unwrap();
        let tokens = words(&["a", "b"]);
        assert_eq!(net.infer(&tokens, None).unwrap(), rebuilt.infer(&tokens, None).unwrap());
    }

    #[test]
    fn from_parts_rejects_wrong_shapes() {
        let net = small_net(Variant::Base);
        let mut params: Vec<(String, Tensor)> = net
            .store()
            .iter()
            .map(|(_, name, t)| (name.to_string(), t.clone()))
            .collect();
        params.pop();
        let err = PartlyLayeredNet::from_parts(
            net.spec().clone(),
            net.vocab().tokens().to_vec(),
            true,
            params,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::SpecMismatch { .. }));
    }
}
