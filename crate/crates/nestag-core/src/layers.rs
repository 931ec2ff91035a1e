//! Neural building blocks: embedding lookup, LSTM stacks, dense layers,
//! inverted dropout and layer normalization.
//!
//! Parameters live in a [`ParamStore`]; each block records its forward
//! pass on a [`GradientTape`]. Initialization is uniform in
//! `(-1/sqrt(fan_in), +1/sqrt(fan_in))` with zero biases, except LSTM
//! forget-gate biases which start at 1.0.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::numerics::{GradientTape, NumericsError, ParamId, ParamStore, Tensor, Value};
use crate::rng::Rng;

/// Whether stochastic layers (dropout) are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerError {
    Numerics(NumericsError),
    /// Extra context vectors do not match the token count.
    DimMismatch { expected: usize, got: usize },
    /// Dropout rate outside `[0, 1)`.
    InvalidRate { rate: f64 },
    EmptyInput,
}

impl From<NumericsError> for LayerError {
    fn from(e: NumericsError) -> Self {
        LayerError::Numerics(e)
    }
}

impl fmt::Display for LayerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerError::Numerics(e) => write!(f, "{e}"),
            LayerError::DimMismatch { expected, got } => {
                write!(f, "expected {expected} per-token rows, got {got}")
            }
            LayerError::InvalidRate { rate } => write!(f, "dropout rate {rate} not in [0, 1)"),
            LayerError::EmptyInput => write!(f, "empty input"),
        }
    }
}

impl core::error::Error for LayerError {}

/// Token-to-index map with reserved unknown and padding entries.
#[derive(Clone, Debug)]
pub struct Vocab {
    index: BTreeMap<String, usize>,
    tokens: Vec<String>,
}

pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";

impl Vocab {
    /// Builds a vocabulary; duplicates are ignored, UNK and PAD are always
    /// present at indices 0 and 1.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab {
            index: BTreeMap::new(),
            tokens: Vec::new(),
        };
        vocab.insert(UNK_TOKEN.to_string());
        vocab.insert(PAD_TOKEN.to_string());
        for t in tokens {
            vocab.insert(t.into());
        }
        vocab
    }

    fn insert(&mut self, token: String) {
        if !self.index.contains_key(&token) {
            self.index.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
        }
    }

    pub fn unk_index(&self) -> usize {
        0
    }

    /// Index of a token, or the UNK index when absent.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in index order, including the reserved entries.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Embedding lookup table backed by a `[V, d]` parameter.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub vocab: Vocab,
    pub vectors: ParamId,
    pub dim: usize,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// Randomly initialized table; trainable by default.
    pub fn random<I, S>(store: &mut ParamStore, tokens: I, dim: usize, rng: &mut Rng) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocab = Vocab::new(tokens);
        let bound = 1.0 / fmath::sqrt(dim as f64);
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for _ in 0..vocab.len() * dim {
            data.push(rng.uniform(-bound, bound));
        }
        let vectors = store.add(
            "embedding",
            Tensor::new(alloc::vec![vocab.len(), dim], data).expect("finite init"),
        );
        EmbeddingTable {
            vocab,
            vectors,
            dim,
            trainable: true,
        }
    }

    /// Table from pretrained vectors; frozen by default. UNK and PAD get
    /// zero rows; duplicate tokens keep their first vector.
    pub fn from_pretrained(
        store: &mut ParamStore,
        entries: &[(String, Vec<f64>)],
        dim: usize,
        trainable: bool,
    ) -> Result<Self, LayerError> {
        let vocab = Vocab::new(entries.iter().map(|(t, _)| t.clone()));
        let mut data = alloc::vec![0.0; vocab.len() * dim];
        let mut filled = alloc::collections::BTreeSet::new();
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(LayerError::DimMismatch {
                    expected: dim,
                    got: vector.len(),
                });
            }
            let idx = vocab.lookup(token);
            if filled.insert(idx) {
                data[idx * dim..(idx + 1) * dim].copy_from_slice(vector);
            }
        }
        let vectors = store.add(
            "embedding",
            Tensor::new(alloc::vec![vocab.len(), dim], data)
                .map_err(LayerError::Numerics)?,
        );
        Ok(EmbeddingTable {
            vocab,
            vectors,
            dim,
            trainable,
        })
    }

    /// Rebuilds a table around an already stored parameter (checkpoint load).
    pub fn from_parts(vocab: Vocab, vectors: ParamId, dim: usize, trainable: bool) -> Self {
        EmbeddingTable {
            vocab,
            vectors,
            dim,
            trainable,
        }
    }
}

/// Looks up token embeddings, mapping unknown tokens to the UNK row, and
/// concatenates optional per-token context vectors on the feature axis.
pub fn embed(
    tape: &mut GradientTape,
    store: &ParamStore,
    table: &EmbeddingTable,
    tokens: &[String],
    extra: Option<&Tensor>,
) -> Result<Value, LayerError> {
    if tokens.is_empty() {
        return Err(LayerError::EmptyInput);
    }
    let indices: Vec<usize> = tokens.iter().map(|t| table.vocab.lookup(t)).collect();
    let base = tape.param(table.vectors, store);
    let looked_up = tape.gather_rows(base, &indices)?;
    match extra {
        None => Ok(looked_up),
        Some(ctx) => {
            if ctx.rows() != tokens.len() {
                return Err(LayerError::DimMismatch {
                    expected: tokens.len(),
                    got: ctx.rows(),
                });
            }
            let ctx_value = tape.constant(ctx.clone());
            Ok(tape.concat_cols(looked_up, ctx_value)?)
        }
    }
}

/// Affine layer parameters.
#[derive(Clone, Debug)]
pub struct DenseParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl DenseParams {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let bound = 1.0 / fmath::sqrt(in_dim as f64);
        let wdata: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        let weight = store.add(
            format!("{prefix}.w"),
            Tensor::new(alloc::vec![in_dim, out_dim], wdata).expect("finite init"),
        );
        let bias = store.add(format!("{prefix}.b"), Tensor::zeros(alloc::vec![1, out_dim]));
        DenseParams { weight, bias }
    }
}

/// `x W + b` with the bias broadcast over rows.
pub fn dense(
    tape: &mut GradientTape,
    store: &ParamStore,
    params: &DenseParams,
    x: Value,
) -> Result<Value, LayerError> {
    let w = tape.param(params.weight, store);
    let b = tape.param(params.bias, store);
    let product = tape.matmul(x, w)?;
    Ok(tape.add_rows(product, b)?)
}

/// Inverted dropout: in train mode keeps each element with probability
/// `1 - rate` and scales survivors by `1/(1 - rate)`; identity in eval
/// mode and at rate 0.
pub fn dropout(
    tape: &mut GradientTape,
    x: Value,
    rate: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Value, LayerError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(LayerError::InvalidRate { rate });
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x);
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let shape = tape.value(x).shape().to_vec();
    let numel = tape.value(x).numel();
    let mask_data: Vec<f64> = (0..numel)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep_scale })
        .collect();
    let mask = tape.constant(Tensor::new(shape, mask_data).expect("finite mask"));
    Ok(tape.mul(x, mask)?)
}

/// Layer-norm parameters: per-feature gain and bias.
#[derive(Clone, Debug)]
pub struct NormParams {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl NormParams {
    pub fn init(store: &mut ParamStore, prefix: &str, dim: usize) -> Self {
        let gain = store.add(
            format!("{prefix}.gain"),
            Tensor::new(alloc::vec![1, dim], alloc::vec![1.0; dim]).expect("finite init"),
        );
        let bias = store.add(format!("{prefix}.bias"), Tensor::zeros(alloc::vec![1, dim]));
        NormParams { gain, bias }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Normalizes each row to zero mean / unit variance, then applies the
/// learned gain and bias.
pub fn layer_norm(
    tape: &mut GradientTape,
    store: &ParamStore,
    params: &NormParams,
    x: Value,
) -> Result<Value, LayerError> {
    let normed = tape.layer_norm_rows(x, LAYER_NORM_EPS)?;
    let gain = tape.param(params.gain, store);
    let bias = tape.param(params.bias, store);
    let scaled = tape.mul_rows(normed, gain)?;
    Ok(tape.add_rows(scaled, bias)?)
}

/// Gate order used throughout: input, forget, cell, output.
const GATE_NAMES: [&str; 4] = ["i", "f", "g", "o"];

/// One LSTM layer: four input matrices, four recurrent matrices, four
/// biases.
#[derive(Clone, Debug)]
pub struct LstmLayerParams {
    pub w_in: [ParamId; 4],
    pub w_rec: [ParamId; 4],
    pub bias: [ParamId; 4],
}

/// A stack of LSTM layers applied left to right with inter-layer dropout.
#[derive(Clone, Debug)]
pub struct LstmStack {
    pub layers: Vec<LstmLayerParams>,
    pub hidden_dim: usize,
    pub dropout_between: f64,
}

impl LstmStack {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        dropout_between: f64,
        rng: &mut Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(num_layers);
        for li in 0..num_layers {
            let in_dim = if li == 0 { input_dim } else { hidden_dim };
            let in_bound = 1.0 / fmath::sqrt(in_dim as f64);
            let rec_bound = 1.0 / fmath::sqrt(hidden_dim as f64);
            let mut w_in = [ParamId(0); 4];
            let mut w_rec = [ParamId(0); 4];
            let mut bias = [ParamId(0); 4];
            for (gi, gate) in GATE_NAMES.iter().enumerate() {
                let wdata: Vec<f64> = (0..in_dim * hidden_dim)
                    .map(|_| rng.uniform(-in_bound, in_bound))
                    .collect();
                w_in[gi] = store.add(
                    format!("{prefix}.l{li}.w_in.{gate}"),
                    Tensor::new(alloc::vec![in_dim, hidden_dim], wdata).expect("finite init"),
                );
            }
            for (gi, gate) in GATE_NAMES.iter().enumerate() {
                let wdata: Vec<f64> = (0..hidden_dim * hidden_dim)
                    .map(|_| rng.uniform(-rec_bound, rec_bound))
                    .collect();
                w_rec[gi] = store.add(
                    format!("{prefix}.l{li}.w_rec.{gate}"),
                    Tensor::new(alloc::vec![hidden_dim, hidden_dim], wdata).expect("finite init"),
                );
            }
            for (gi, gate) in GATE_NAMES.iter().enumerate() {
                // forget gate starts open
                let fill = if gi == 1 { 1.0 } else { 0.0 };
                bias[gi] = store.add(
                    format!("{prefix}.l{li}.bias.{gate}"),
                    Tensor::new(alloc::vec![1, hidden_dim], alloc::vec![fill; hidden_dim])
                        .expect("finite init"),
                );
            }
            layers.push(LstmLayerParams { w_in, w_rec, bias });
        }
        LstmStack {
            layers,
            hidden_dim,
            dropout_between,
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for layer in &self.layers {
            ids.extend_from_slice(&layer.w_in);
            ids.extend_from_slice(&layer.w_rec);
            ids.extend_from_slice(&layer.bias);
        }
        ids
    }
}

/// Unidirectional left-to-right LSTM over `x: [n, d]`, returning the top
/// layer's hidden states `[n, h]`. Initial hidden and cell states are
/// zero; stacked layers apply inter-layer dropout in train mode.
pub fn lstm_forward(
    tape: &mut GradientTape,
    store: &ParamStore,
    stack: &LstmStack,
    x: Value,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Value, LayerError> {
    let n = tape.value(x).rows();
    if n == 0 {
        return Err(LayerError::EmptyInput);
    }
    let h = stack.hidden_dim;
    let mut layer_input = x;
    for (li, layer) in stack.layers.iter().enumerate() {
        if li > 0 {
            layer_input = dropout(tape, layer_input, stack.dropout_between, mode, rng)?;
        }
        let w_in: Vec<Value> = layer.w_in.iter().map(|&p| tape.param(p, store)).collect();
        let w_rec: Vec<Value> = layer.w_rec.iter().map(|&p| tape.param(p, store)).collect();
        let bias: Vec<Value> = layer.bias.iter().map(|&p| tape.param(p, store)).collect();
        let mut h_prev = tape.constant(Tensor::zeros(alloc::vec![1, h]));
        let mut c_prev = tape.constant(Tensor::zeros(alloc::vec![1, h]));
        let mut hidden_states = Vec::with_capacity(n);
        for t in 0..n {
            let xt = tape.row(layer_input, t)?;
            let mut pre = [xt; 4];
            for gi in 0..4 {
                let from_input = tape.matmul(xt, w_in[gi])?;
                let from_hidden = tape.matmul(h_prev, w_rec[gi])?;
                let summed = tape.add(from_input, from_hidden)?;
                pre[gi] = tape.add(summed, bias[gi])?;
            }
            let gate_i = tape.sigmoid(pre[0])?;
            let gate_f = tape.sigmoid(pre[1])?;
            let gate_g = tape.tanh(pre[2])?;
            let gate_o = tape.sigmoid(pre[3])?;
            let keep = tape.mul(gate_f, c_prev)?;
            let write = tape.mul(gate_i, gate_g)?;
            let cell = tape.add(keep, write)?;
            let cell_act = tape.tanh(cell)?;
            let hidden = tape.mul(gate_o, cell_act)?;
            hidden_states.push(hidden);
            h_prev = hidden;
            c_prev = cell;
        }
        layer_input = tape.concat_rows(&hidden_states)?;
    }
    Ok(layer_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn tokens(ts: &[&str]) -> Vec<String> {
        ts.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn embed_known_token_returns_stored_row() {
        let mut store = ParamStore::new();
        let entries = vec![
            ("the".to_string(), vec![0.1, 0.2, 0.3]),
            ("cat".to_string(), vec![1.0, 2.0, 3.0]),
        ];
        let table = EmbeddingTable::from_pretrained(&mut store, &entries, 3, false).unwrap();
        let mut tape = GradientTape::new();
        let v = embed(&mut tape, &store, &table, &tokens(&["the"]), None).unwrap();
        assert_eq!(tape.value(v).data(), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn embed_oov_maps_to_unk_row() {
        let mut store = ParamStore::new();
        let entries = vec![("the".to_string(), vec![0.1, 0.2, 0.3])];
        let table = EmbeddingTable::from_pretrained(&mut store, &entries, 3, false).unwrap();
        let mut tape = GradientTape::new();
        let v = embed(&mut tape, &store, &table, &tokens(&["XaaydaGa"]), None).unwrap();
        let unk_row = &store.get(table.vectors).data()[0..3];
        assert_eq!(tape.value(v).data(), unk_row);
    }

    #[test]
    fn embed_concatenates_context_vectors() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(3);
        let table = EmbeddingTable::random(&mut store, ["a", "b"], 3, &mut rng);
        let ctx = Tensor::from_rows(&[vec![9.0, 8.0], vec![7.0, 6.0]]).unwrap();
        let mut tape = GradientTape::new();
        let v = embed(&mut tape, &store, &table, &tokens(&["a", "b"]), Some(&ctx)).unwrap();
        assert_eq!(tape.value(v).shape(), &[2, 5]);
        assert_eq!(tape.value(v).data()[3..5], [9.0, 8.0]);
    }

    #[test]
    fn embed_rejects_context_row_mismatch() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(3);
        let table = EmbeddingTable::random(&mut store, ["a"], 3, &mut rng);
        let ctx = Tensor::from_rows(&[vec![1.0]]).unwrap();
        let mut tape = GradientTape::new();
        let err = embed(&mut tape, &store, &table, &tokens(&["a", "a"]), Some(&ctx)).unwrap_err();
        assert_eq!(err, LayerError::DimMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn lstm_all_zero_params_gives_zero_outputs() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let mut stack = LstmStack::init(&mut store, "seq", 2, 3, 1, 0.0, &mut rng);
        for layer in &mut stack.layers {
            for pid in layer.w_in.iter().chain(&layer.w_rec).chain(&layer.bias) {
                let shape = store.get(*pid).shape().to_vec();
                store.set(*pid, Tensor::zeros(shape)).unwrap();
            }
        }
        let mut tape = GradientTape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![5.0, -3.0], vec![2.0, 2.0]]).unwrap());
        let out = lstm_forward(&mut tape, &store, &stack, x, Mode::Eval, &mut rng).unwrap();
        assert!(tape.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_single_step_matches_hand_recurrence() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let stack = LstmStack::init(&mut store, "seq", 1, 1, 1, 0.0, &mut rng);
        let layer = &stack.layers[0];
        let set = |store: &mut ParamStore, pid: ParamId, v: f64| {
            let shape = store.get(pid).shape().to_vec();
            store.set(pid, Tensor::filled(shape, v)).unwrap();
        };
        // gate order i, f, g, o
        let wx = [0.5, 0.3, 1.2, 0.8];
        let b = [0.1, 1.0, -0.2, 0.05];
        for gi in 0..4 {
            set(&mut store, layer.w_in[gi], wx[gi]);
            set(&mut store, layer.w_rec[gi], 0.9); // h0 = 0, no effect
            set(&mut store, layer.bias[gi], b[gi]);
        }
        let x0 = 0.7;
        let mut tape = GradientTape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![x0]]).unwrap());
        let out = lstm_forward(&mut tape, &store, &stack, x, Mode::Eval, &mut rng).unwrap();

        let gi = sigmoid(x0 * wx[0] + b[0]);
        let gg = (x0 * wx[2] + b[2]).tanh();
        let go = sigmoid(x0 * wx[3] + b[3]);
        let c = gi * gg;
        let expected = go * c.tanh();
        assert!((tape.value(out).data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn lstm_is_causal() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(11);
        let stack = LstmStack::init(&mut store, "seq", 2, 3, 2, 0.0, &mut rng);
        let full_rows = vec![
            vec![0.5, -0.2],
            vec![1.0, 0.3],
            vec![-0.7, 0.9],
            vec![0.1, 0.1],
        ];
        let mut tape = GradientTape::new();
        let x_full = tape.constant(Tensor::from_rows(&full_rows).unwrap());
        let full = lstm_forward(&mut tape, &store, &stack, x_full, Mode::Eval, &mut rng).unwrap();
        let x_prefix = tape.constant(Tensor::from_rows(&full_rows[0..2]).unwrap());
        let prefix = lstm_forward(&mut tape, &store, &stack, x_prefix, Mode::Eval, &mut rng).unwrap();
        assert_eq!(
            &tape.value(full).data()[0..2 * 3],
            tape.value(prefix).data()
        );
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut tape = GradientTape::new();
        let mut rng = Rng::new(2);
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let y = dropout(&mut tape, x, 0.4, Mode::Eval, &mut rng).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn dropout_zero_rate_is_identity_in_train() {
        let mut tape = GradientTape::new();
        let mut rng = Rng::new(2);
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let y = dropout(&mut tape, x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn dropout_rejects_bad_rate() {
        let mut tape = GradientTape::new();
        let mut rng = Rng::new(2);
        let x = tape.constant(Tensor::scalar(1.0));
        assert!(dropout(&mut tape, x, 1.0, Mode::Train, &mut rng).is_err());
        assert!(dropout(&mut tape, x, -0.1, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_expectation_matches_input() {
        // E[inverted dropout] = x; Monte-Carlo over many masks
        let mut rng = Rng::new(7);
        let x_vals = [1.0, -2.0, 0.5];
        let trials = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..trials {
            let mut tape = GradientTape::new();
            let x = tape.constant(Tensor::from_rows(&[x_vals.to_vec()]).unwrap());
            let y = dropout(&mut tape, x, 0.5, Mode::Train, &mut rng).unwrap();
            for (s, v) in sums.iter_mut().zip(tape.value(y).data()) {
                *s += v;
            }
        }
        for (s, x) in sums.iter().zip(&x_vals) {
            let mean = s / trials as f64;
            assert!(
                (mean - x).abs() <= 0.02 * x.abs(),
                "mean {mean} vs {x}"
            );
        }
    }

    #[test]
    fn layer_norm_zero_mean_unit_variance() {
        let mut store = ParamStore::new();
        let norm = NormParams::init(&mut store, "norm", 3);
        let mut tape = GradientTape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap());
        let y = layer_norm(&mut tape, &store, &norm, x).unwrap();
        let row = tape.value(y).data();
        let mean: f64 = row.iter().sum::<f64>() / 3.0;
        let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4); // eps shifts variance slightly
    }
}
