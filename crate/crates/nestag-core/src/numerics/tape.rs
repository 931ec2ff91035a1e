use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{matrix_dims, Tensor};
use super::NumericsError;
use crate::fmath;

/// Identifies a trainable parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Owns the parameter tensors of a model, addressed by [`ParamId`].
///
/// Insertion order is stable, which makes checkpoint layouts and seeded
/// initialization reproducible.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    /// Replaces a parameter; the new tensor must keep the shape.
    pub fn set(&mut self, id: ParamId, t: Tensor) -> Result<(), NumericsError> {
        if t.shape() != self.tensors[id.0].shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "param_set",
                lhs: self.tensors[id.0].shape().to_vec(),
                rhs: t.shape().to_vec(),
            });
        }
        t.ensure_finite("param_set")?;
        self.tensors[id.0] = t;
        Ok(())
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), self.names[i].as_str(), t))
    }
}

/// Handle to a value recorded on a [`GradientTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Value(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Exact,
    ScalarLhs,
    ScalarRhs,
    /// rhs is a single row combined with every row of lhs.
    RowRhs,
}

enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize, bcast: Broadcast },
    Mul { a: usize, b: usize, bcast: Broadcast },
    Scale { a: usize, k: f64 },
    Tanh { a: usize },
    Sigmoid { a: usize },
    Relu { a: usize },
    SoftmaxRows { a: usize },
    LogSoftmaxRows { a: usize },
    Sum { a: usize },
    Row { a: usize, index: usize },
    ConcatRows { parts: Vec<usize> },
    ConcatCols { a: usize, b: usize },
    GatherRows { a: usize, indices: Vec<usize> },
    Pick { a: usize, indices: Vec<(usize, usize)> },
    LayerNormRows { a: usize, inv_std: Vec<f64> },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Define-by-run record of differentiable ops.
///
/// A tape lives for one forward/backward pass: record ops, call
/// [`backward`](GradientTape::backward) on a scalar, then read gradients
/// per value or per parameter. Tapes are single-threaded; run independent
/// sentences on independent tapes.
#[derive(Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    param_values: BTreeMap<usize, Value>,
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant leaf (no gradient is reported for it).
    pub fn constant(&mut self, t: Tensor) -> Value {
        self.push(Op::Leaf, t)
    }

    /// Records a parameter leaf; repeated calls for the same id return the
    /// same value so gradient contributions accumulate per parameter.
    pub fn param(&mut self, id: ParamId, store: &ParamStore) -> Value {
        if let Some(&v) = self.param_values.get(&id.0) {
            return v;
        }
        let v = self.push(Op::Leaf, store.get(id).clone());
        self.param_values.insert(id.0, v);
        v
    }

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Value {
        self.nodes.push(Node { op, value });
        Value(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<Value, NumericsError> {
        value.ensure_finite(name)?;
        Ok(self.push(op, value))
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value, NumericsError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.record(Op::Matmul { a: a.0, b: b.0 }, out, "matmul")
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value, NumericsError> {
        let bcast = classify_broadcast(self.value(a), self.value(b), "add", false)?;
        let out = apply_binary(self.value(a), self.value(b), bcast, |x, y| x + y);
        self.record(Op::Add { a: a.0, b: b.0, bcast }, out, "add")
    }

    /// Adds a single row (e.g. a bias) to every row of a matrix.
    pub fn add_rows(&mut self, a: Value, row: Value) -> Result<Value, NumericsError> {
        let bcast = classify_broadcast(self.value(a), self.value(row), "add_rows", true)?;
        let out = apply_binary(self.value(a), self.value(row), bcast, |x, y| x + y);
        self.record(Op::Add { a: a.0, b: row.0, bcast }, out, "add_rows")
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value, NumericsError> {
        let bcast = classify_broadcast(self.value(a), self.value(b), "mul", false)?;
        let out = apply_binary(self.value(a), self.value(b), bcast, |x, y| x * y);
        self.record(Op::Mul { a: a.0, b: b.0, bcast }, out, "mul")
    }

    /// Multiplies every row of a matrix by a single row (e.g. a gain).
    pub fn mul_rows(&mut self, a: Value, row: Value) -> Result<Value, NumericsError> {
        let bcast = classify_broadcast(self.value(a), self.value(row), "mul_rows", true)?;
        let out = apply_binary(self.value(a), self.value(row), bcast, |x, y| x * y);
        self.record(Op::Mul { a: a.0, b: row.0, bcast }, out, "mul_rows")
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value, NumericsError> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    pub fn scale(&mut self, a: Value, k: f64) -> Result<Value, NumericsError> {
        let out = self.value(a).map(|x| k * x);
        self.record(Op::Scale { a: a.0, k }, out, "scale")
    }

    pub fn tanh(&mut self, a: Value) -> Result<Value, NumericsError> {
        let out = self.value(a).map(fmath::tanh);
        self.record(Op::Tanh { a: a.0 }, out, "tanh")
    }

    pub fn sigmoid(&mut self, a: Value) -> Result<Value, NumericsError> {
        let out = self.value(a).map(|x| 1.0 / (1.0 + fmath::exp(-x)));
        self.record(Op::Sigmoid { a: a.0 }, out, "sigmoid")
    }

    pub fn relu(&mut self, a: Value) -> Result<Value, NumericsError> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.record(Op::Relu { a: a.0 }, out, "relu")
    }

    /// Row-wise softmax with max-subtraction; rows sum to one.
    pub fn softmax_rows(&mut self, a: Value) -> Result<Value, NumericsError> {
        let out = softmax_value(self.value(a), false)?;
        self.record(Op::SoftmaxRows { a: a.0 }, out, "softmax_rows")
    }

    /// Row-wise log-softmax; stable for any logit magnitude.
    pub fn log_softmax_rows(&mut self, a: Value) -> Result<Value, NumericsError> {
        let out = softmax_value(self.value(a), true)?;
        self.record(Op::LogSoftmaxRows { a: a.0 }, out, "log_softmax_rows")
    }

    /// Sums all elements into a scalar.
    pub fn sum(&mut self, a: Value) -> Result<Value, NumericsError> {
        let s: f64 = self.value(a).data().iter().sum();
        self.record(Op::Sum { a: a.0 }, Tensor::scalar(s), "sum")
    }

    /// Extracts row `index` as a `[1, c]` matrix.
    pub fn row(&mut self, a: Value, index: usize) -> Result<Value, NumericsError> {
        let t = self.value(a);
        let (r, c) = matrix_dims(t, "row")?;
        if index >= r {
            return Err(NumericsError::IndexOutOfRange {
                op: "row",
                index,
                bound: r,
            });
        }
        let data = t.data()[index * c..(index + 1) * c].to_vec();
        let out = Tensor::from_raw(vec![1, c], data);
        self.record(Op::Row { a: a.0, index }, out, "row")
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Value]) -> Result<Value, NumericsError> {
        if parts.is_empty() {
            return Err(NumericsError::ShapeMismatch {
                op: "concat_rows",
                lhs: vec![],
                rhs: vec![],
            });
        }
        let c = matrix_dims(self.value(parts[0]), "concat_rows")?.1;
        let mut data = Vec::new();
        let mut n = 0;
        for &p in parts {
            let t = self.value(p);
            let (r, pc) = matrix_dims(t, "concat_rows")?;
            if pc != c {
                return Err(NumericsError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: vec![c],
                    rhs: vec![pc],
                });
            }
            n += r;
            data.extend_from_slice(t.data());
        }
        let out = Tensor::from_raw(vec![n, c], data);
        self.record(
            Op::ConcatRows {
                parts: parts.iter().map(|v| v.0).collect(),
            },
            out,
            "concat_rows",
        )
    }

    /// Concatenates two matrices along the feature axis.
    pub fn concat_cols(&mut self, a: Value, b: Value) -> Result<Value, NumericsError> {
        let ta = self.value(a);
        let tb = self.value(b);
        let (ra, ca) = matrix_dims(ta, "concat_cols")?;
        let (rb, cb) = matrix_dims(tb, "concat_cols")?;
        if ra != rb {
            return Err(NumericsError::ShapeMismatch {
                op: "concat_cols",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            data.extend_from_slice(&ta.data()[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&tb.data()[i * cb..(i + 1) * cb]);
        }
        let out = Tensor::from_raw(vec![ra, ca + cb], data);
        self.record(Op::ConcatCols { a: a.0, b: b.0 }, out, "concat_cols")
    }

    /// Selects rows by index (repeats allowed); gradients scatter-add.
    pub fn gather_rows(&mut self, a: Value, indices: &[usize]) -> Result<Value, NumericsError> {
        let t = self.value(a);
        let (r, c) = matrix_dims(t, "gather_rows")?;
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= r {
                return Err(NumericsError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    bound: r,
                });
            }
            data.extend_from_slice(&t.data()[i * c..(i + 1) * c]);
        }
        let out = Tensor::from_raw(vec![indices.len(), c], data);
        self.record(
            Op::GatherRows {
                a: a.0,
                indices: indices.to_vec(),
            },
            out,
            "gather_rows",
        )
    }

    /// Picks individual `(row, col)` elements into a `[k, 1]` column.
    pub fn pick(&mut self, a: Value, indices: &[(usize, usize)]) -> Result<Value, NumericsError> {
        let t = self.value(a);
        let (r, c) = matrix_dims(t, "pick")?;
        let mut data = Vec::with_capacity(indices.len());
        for &(ri, ci) in indices {
            if ri >= r {
                return Err(NumericsError::IndexOutOfRange {
                    op: "pick",
                    index: ri,
                    bound: r,
                });
            }
            if ci >= c {
                return Err(NumericsError::IndexOutOfRange {
                    op: "pick",
                    index: ci,
                    bound: c,
                });
            }
            data.push(t.data()[ri * c + ci]);
        }
        let out = Tensor::from_raw(vec![indices.len(), 1], data);
        self.record(
            Op::Pick {
                a: a.0,
                indices: indices.to_vec(),
            },
            out,
            "pick",
        )
    }

    /// Normalizes each row to zero mean / unit variance (gain and bias are
    /// applied by the caller via [`mul_rows`](Self::mul_rows) /
    /// [`add_rows`](Self::add_rows)).
    pub fn layer_norm_rows(&mut self, a: Value, eps: f64) -> Result<Value, NumericsError> {
        let t = self.value(a);
        let (r, c) = matrix_dims(t, "layer_norm_rows")?;
        let mut data = vec![0.0; r * c];
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = &t.data()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / fmath::sqrt(var + eps);
            inv_std.push(is);
            for j in 0..c {
                data[i * c + j] = (row[j] - mean) * is;
            }
        }
        let out = Tensor::from_raw(t.shape().to_vec(), data);
        self.record(Op::LayerNormRows { a: a.0, inv_std }, out, "layer_norm_rows")
    }

    /// Accumulates gradients of `from` (a scalar) with respect to every
    /// recorded value, visiting ops in exact reverse execution order.
    pub fn backward(&mut self, from: Value) -> Result<(), NumericsError> {
        let out = &self.nodes[from.0].value;
        if !out.is_scalar() {
            return Err(NumericsError::NotScalar {
                op: "backward",
                shape: out.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[from.0] = Some(Tensor::from_raw(out.shape().to_vec(), vec![1.0]));

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |grads: &mut [Option<Tensor>], target: usize, delta_fn: &mut dyn FnMut(&mut [f64])| {
            let slot = grads[target].get_or_insert_with(|| Tensor::zeros(self.nodes[target].value.shape().to_vec()));
            delta_fn(slot.data_mut());
        };
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let ta = &self.nodes[*a].value;
                let tb = &self.nodes[*b].value;
                // d a = g . b^T ; d b = a^T . g
                let gm = reshape_as_matrix(g);
                let da = gm.matmul(&tb.transpose().expect("recorded matmul operand")).expect("matmul backward");
                let db = ta.transpose().expect("recorded matmul operand").matmul(&gm).expect("matmul backward");
                acc(grads, *a, &mut |s| add_into(s, da.data()));
                acc(grads, *b, &mut |s| add_into(s, db.data()));
            }
            Op::Add { a, b, bcast } => {
                match bcast {
                    Broadcast::Exact => {
                        acc(grads, *a, &mut |s| add_into(s, g.data()));
                        acc(grads, *b, &mut |s| add_into(s, g.data()));
                    }
                    Broadcast::ScalarLhs => {
                        acc(grads, *a, &mut |s| s[0] += g.data().iter().sum::<f64>());
                        acc(grads, *b, &mut |s| add_into(s, g.data()));
                    }
                    Broadcast::ScalarRhs => {
                        acc(grads, *a, &mut |s| add_into(s, g.data()));
                        acc(grads, *b, &mut |s| s[0] += g.data().iter().sum::<f64>());
                    }
                    Broadcast::RowRhs => {
                        acc(grads, *a, &mut |s| add_into(s, g.data()));
                        let c = self.nodes[*b].value.numel();
                        acc(grads, *b, &mut |s| {
                            for (k, gv) in g.data().iter().enumerate() {
                                s[k % c] += gv;
                            }
                        });
                    }
                }
            }
            Op::Mul { a, b, bcast } => {
                let ta = &self.nodes[*a].value;
                let tb = &self.nodes[*b].value;
                match bcast {
                    Broadcast::Exact => {
                        acc(grads, *a, &mut |s| {
                            for ((sv, gv), bv) in s.iter_mut().zip(g.data()).zip(tb.data()) {
                                *sv += gv * bv;
                            }
                        });
                        acc(grads, *b, &mut |s| {
                            for ((sv, gv), av) in s.iter_mut().zip(g.data()).zip(ta.data()) {
                                *sv += gv * av;
                            }
                        });
                    }
                    Broadcast::ScalarLhs => {
                        let a0 = ta.data()[0];
                        acc(grads, *a, &mut |s| {
                            s[0] += g
                                .data()
                                .iter()
                                .zip(tb.data())
                                .map(|(gv, bv)| gv * bv)
                                .sum::<f64>();
                        });
                        acc(grads, *b, &mut |s| {
                            for (sv, gv) in s.iter_mut().zip(g.data()) {
                                *sv += gv * a0;
                            }
                        });
                    }
                    Broadcast::ScalarRhs => {
                        let b0 = tb.data()[0];
                        acc(grads, *a, &mut |s| {
                            for (sv, gv) in s.iter_mut().zip(g.data()) {
                                *sv += gv * b0;
                            }
                        });
                        acc(grads, *b, &mut |s| {
                            s[0] += g
                                .data()
                                .iter()
                                .zip(ta.data())
                                .map(|(gv, av)| gv * av)
                                .sum::<f64>();
                        });
                    }
                    Broadcast::RowRhs => {
                        let c = tb.numel();
                        acc(grads, *a, &mut |s| {
                            for (k, (sv, gv)) in s.iter_mut().zip(g.data()).enumerate() {
                                *sv += gv * tb.data()[k % c];
                            }
                        });
                        acc(grads, *b, &mut |s| {
                            for (k, gv) in g.data().iter().enumerate() {
                                s[k % c] += gv * ta.data()[k];
                            }
                        });
                    }
                }
            }
            Op::Scale { a, k } => {
                acc(grads, *a, &mut |s| {
                    for (sv, gv) in s.iter_mut().zip(g.data()) {
                        *sv += k * gv;
                    }
                });
            }
            Op::Tanh { a } => {
                let y = &node.value;
                acc(grads, *a, &mut |s| {
                    for ((sv, gv), yv) in s.iter_mut().zip(g.data()).zip(y.data()) {
                        *sv += gv * (1.0 - yv * yv);
                    }
                });
            }
            Op::Sigmoid { a } => {
                let y = &node.value;
                acc(grads, *a, &mut |s| {
                    for ((sv, gv), yv) in s.iter_mut().zip(g.data()).zip(y.data()) {
                        *sv += gv * yv * (1.0 - yv);
                    }
                });
            }
            Op::Relu { a } => {
                let x = &self.nodes[*a].value;
                acc(grads, *a, &mut |s| {
                    for ((sv, gv), xv) in s.iter_mut().zip(g.data()).zip(x.data()) {
                        if *xv > 0.0 {
                            *sv += gv;
                        }
                    }
                });
            }
            Op::SoftmaxRows { a } => {
                let y = &node.value;
                let c = y.cols();
                acc(grads, *a, &mut |s| {
                    for (row, srow) in s.chunks_mut(c).enumerate() {
                        let gy = &g.data()[row * c..(row + 1) * c];
                        let yy = &y.data()[row * c..(row + 1) * c];
                        let dot: f64 = gy.iter().zip(yy).map(|(gv, yv)| gv * yv).sum();
                        for j in 0..c {
                            srow[j] += yy[j] * (gy[j] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmaxRows { a } => {
                let y = &node.value;
                let c = y.cols();
                acc(grads, *a, &mut |s| {
                    for (row, srow) in s.chunks_mut(c).enumerate() {
                        let gy = &g.data()[row * c..(row + 1) * c];
                        let yy = &y.data()[row * c..(row + 1) * c];
                        let gsum: f64 = gy.iter().sum();
                        for j in 0..c {
                            srow[j] += gy[j] - fmath::exp(yy[j]) * gsum;
                        }
                    }
                });
            }
            Op::Sum { a } => {
                let g0 = g.data()[0];
                acc(grads, *a, &mut |s| {
                    for sv in s.iter_mut() {
                        *sv += g0;
                    }
                });
            }
            Op::Row { a, index } => {
                let c = node.value.cols();
                acc(grads, *a, &mut |s| {
                    add_into(&mut s[index * c..(index + 1) * c], g.data());
                });
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p].value.numel();
                    acc(grads, p, &mut |s| {
                        add_into(s, &g.data()[offset..offset + len]);
                    });
                    offset += len;
                }
            }
            Op::ConcatCols { a, b } => {
                let ca = self.nodes[*a].value.cols();
                let cb = self.nodes[*b].value.cols();
                let rows = self.nodes[*a].value.rows();
                acc(grads, *a, &mut |s| {
                    for i in 0..rows {
                        add_into(
                            &mut s[i * ca..(i + 1) * ca],
                            &g.data()[i * (ca + cb)..i * (ca + cb) + ca],
                        );
                    }
                });
                acc(grads, *b, &mut |s| {
                    for i in 0..rows {
                        add_into(
                            &mut s[i * cb..(i + 1) * cb],
                            &g.data()[i * (ca + cb) + ca..(i + 1) * (ca + cb)],
                        );
                    }
                });
            }
            Op::GatherRows { a, indices } => {
                let c = node.value.cols();
                acc(grads, *a, &mut |s| {
                    for (t, &src) in indices.iter().enumerate() {
                        add_into(&mut s[src * c..(src + 1) * c], &g.data()[t * c..(t + 1) * c]);
                    }
                });
            }
            Op::Pick { a, indices } => {
                let c = self.nodes[*a].value.cols();
                acc(grads, *a, &mut |s| {
                    for (t, &(ri, ci)) in indices.iter().enumerate() {
                        s[ri * c + ci] += g.data()[t];
                    }
                });
            }
            Op::LayerNormRows { a, inv_std } => {
                let y = &node.value;
                let c = y.cols();
                acc(grads, *a, &mut |s| {
                    for (row, srow) in s.chunks_mut(c).enumerate() {
                        let gy = &g.data()[row * c..(row + 1) * c];
                        let yy = &y.data()[row * c..(row + 1) * c];
                        let gmean: f64 = gy.iter().sum::<f64>() / c as f64;
                        let gymean: f64 =
                            gy.iter().zip(yy).map(|(gv, yv)| gv * yv).sum::<f64>() / c as f64;
                        for j in 0..c {
                            srow[j] += inv_std[row] * (gy[j] - gmean - yy[j] * gymean);
                        }
                    }
                });
            }
        }
    }

    /// Gradient of the last backward pass with respect to a value.
    pub fn grad(&self, v: Value) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient accumulated for a parameter, if it participated.
    pub fn param_grad(&self, id: ParamId) -> Option<&Tensor> {
        self.param_values.get(&id.0).and_then(|&v| self.grad(v))
    }

    /// All parameter gradients from the last backward pass.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.param_values
            .iter()
            .filter_map(move |(&id, &v)| self.grad(v).map(|g| (ParamId(id), g)))
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn reshape_as_matrix(t: &Tensor) -> Tensor {
    let (r, c) = matrix_dims(t, "reshape").expect("matrix operand");
    Tensor::from_raw(vec![r, c], t.data().to_vec())
}

fn classify_broadcast(
    a: &Tensor,
    b: &Tensor,
    op: &'static str,
    row: bool,
) -> Result<Broadcast, NumericsError> {
    if row {
        let (_, ca) = matrix_dims(a, op)?;
        let (rb, cb) = matrix_dims(b, op)?;
        if rb == 1 && cb == ca {
            return Ok(Broadcast::RowRhs);
        }
        return Err(NumericsError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    if a.shape() == b.shape() {
        Ok(Broadcast::Exact)
    } else if b.is_scalar() {
        Ok(Broadcast::ScalarRhs)
    } else if a.is_scalar() {
        Ok(Broadcast::ScalarLhs)
    } else {
        Err(NumericsError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        })
    }
}

fn apply_binary(a: &Tensor, b: &Tensor, bcast: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
    match bcast {
        Broadcast::Exact => {
            let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
            Tensor::from_raw(a.shape().to_vec(), data)
        }
        Broadcast::ScalarRhs => a.map(|x| f(x, b.data()[0])),
        Broadcast::ScalarLhs => b.map(|y| f(a.data()[0], y)),
        Broadcast::RowRhs => {
            let c = b.numel();
            let data = a
                .data()
                .iter()
                .enumerate()
                .map(|(k, x)| f(*x, b.data()[k % c]))
                .collect();
            Tensor::from_raw(a.shape().to_vec(), data)
        }
    }
}

/// Shared softmax / log-softmax forward with max-subtraction.
fn softmax_value(t: &Tensor, log: bool) -> Result<Tensor, NumericsError> {
    let (r, c) = matrix_dims(t, "softmax_rows")?;
    if c < 2 {
        return Err(NumericsError::ShapeMismatch {
            op: "softmax_rows",
            lhs: t.shape().to_vec(),
            rhs: vec![2],
        });
    }
    let mut data = vec![0.0; r * c];
    for i in 0..r {
        let row = &t.data()[i * c..(i + 1) * c];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| fmath::max(m, v));
        let mut denom = 0.0;
        for j in 0..c {
            data[i * c + j] = row[j] - max;
            denom += fmath::exp(data[i * c + j]);
        }
        if log {
            let ld = fmath::ln(denom);
            for j in 0..c {
                data[i * c + j] -= ld;
            }
        } else {
            for j in 0..c {
                data[i * c + j] = fmath::exp(data[i * c + j]) / denom;
            }
        }
    }
    Ok(Tensor::from_raw(t.shape().to_vec(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_forward_and_grad() {
        // gradient of sum(a.b) wrt a at a=[[1,2]], b=[[3],[4]] is [[3,4]]
        let mut tape = GradientTape::new();
        let mut store = ParamStore::new();
        let a = store.add("a", rows(&[&[1.0, 2.0]]));
        let b = store.add("b", rows(&[&[3.0], &[4.0]]));
        let va = tape.param(a, &store);
        let vb = tape.param(b, &store);
        let prod = tape.matmul(va, vb).unwrap();
        assert_eq!(tape.value(prod).data(), &[11.0]);
        let s = tape.sum(prod).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.param_grad(a).unwrap().data(), &[3.0, 4.0]);
        assert_eq!(tape.param_grad(b).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn sigmoid_and_tanh_at_zero() {
        let mut tape = GradientTape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(x).unwrap();
        let t = tape.tanh(x).unwrap();
        assert_eq!(tape.value(s).data(), &[0.5]);
        assert_eq!(tape.value(t).data(), &[0.0]);
    }

    #[test]
    fn sigmoid_grad_at_zero() {
        let mut tape = GradientTape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(x).unwrap();
        let y = tape.sum(s).unwrap();
        tape.backward(y).unwrap();
        assert!((tape.grad(x).unwrap().data()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_basics() {
        let mut tape = GradientTape::new();
        let x = tape.constant(rows(&[&[0.0, 0.0], &[1000.0, 0.0]]));
        // ln(1)=0 and ln(3): probabilities 1/4 and 3/4
        let x2 = tape.constant(rows(&[&[0.0, 3.0_f64.ln()]]));
        let sm = tape.softmax_rows(x).unwrap();
        let d = tape.value(sm).data();
        assert_eq!(&d[0..2], &[0.5, 0.5]);
        assert_eq!(d[2], 1.0);
        assert!(d[3].abs() < 1e-300);
        let sm2 = tape.softmax_rows(x2).unwrap();
        let d2 = tape.value(sm2).data();
        assert!((d2[0] - 0.25).abs() < 1e-12 && (d2[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = GradientTape::new();
        let x = tape.constant(rows(&[&[1.5, -2.0, 0.25], &[10.0, 10.0, 10.0]]));
        let sm = tape.softmax_rows(x).unwrap();
        for row in tape.value(sm).data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn softmax_requires_two_classes() {
        let mut tape = GradientTape::new();
        let x = tape.constant(rows(&[&[1.0]]));
        assert!(tape.softmax_rows(x).is_err());
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut tape = GradientTape::new();
        let big = tape.constant(Tensor::scalar(1e308));
        let sum = tape.add(big, big);
        assert!(matches!(sum, Err(NumericsError::NonFinite { .. })));
    }

    #[test]
    fn ops_do_not_mutate_inputs() {
        let mut tape = GradientTape::new();
        let x = tape.constant(rows(&[&[1.0, 2.0]]));
        let before = tape.value(x).clone();
        let _ = tape.tanh(x).unwrap();
        let _ = tape.scale(x, 3.0).unwrap();
        assert_eq!(tape.value(x), &before);
    }

    #[test]
    fn gather_rows_accumulates_repeats() {
        let mut tape = GradientTape::new();
        let x = tape.constant(rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let g = tape.gather_rows(x, &[0, 0, 1]).unwrap();
        let s = tape.sum(g).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = GradientTape::new();
        let x = tape.constant(rows(&[&[1.0, 2.0]]));
        assert!(matches!(
            tape.backward(x),
            Err(NumericsError::NotScalar { .. })
        ));
    }

    #[test]
    fn param_grad_shape_matches_param() {
        let mut store = ParamStore::new();
        let w = store.add("w", rows(&[&[0.5, -0.25], &[1.0, 2.0], &[0.0, 1.0]]));
        let mut tape = GradientTape::new();
        let vw = tape.param(w, &store);
        let x = tape.constant(rows(&[&[1.0, 2.0, 3.0]]));
        let y = tape.matmul(x, vw).unwrap();
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.param_grad(w).unwrap().shape(), store.get(w).shape());
    }
}
