use std::collections::HashMap;

use crate::{Error, Result};

use super::{ParamId, ParamStore, Real, Tensor};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive kinds accepted by [`Graph::apply`].
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    MatMul,
    Add,
    Mul,
    Concat {
        axis: usize,
    },
    Tanh,
    Sigmoid,
    MaskedSoftmax {
        mask: Vec<bool>,
    },
    MeanOverTime {
        mask: Vec<bool>,
    },
    MaxOverTime {
        mask: Vec<bool>,
    },
    EmbeddingLookup {
        indices: Vec<usize>,
        padding: Option<usize>,
    },
    Slice {
        axis: usize,
        start: usize,
        len: usize,
    },
}

enum Value<F> {
    Owned(Tensor<F>),
    Param(ParamId),
}

enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Tanh(Var),
    Sigmoid(Var),
    MaskedSoftmax(Var),
    MeanOverTime {
        input: Var,
        mask: Vec<bool>,
        count: usize,
    },
    MaxOverTime {
        input: Var,
        argmax: Vec<usize>,
    },
    Embedding {
        table: Var,
        indices: Vec<usize>,
        padding: Option<usize>,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    Sum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        target: usize,
        probs: Vec<F>,
    },
}

struct Node<F> {
    value: Value<F>,
    op: Op<F>,
    requires_grad: bool,
}

/// Gradients produced by one [`Graph::backward`] call.
#[derive(Clone, Debug, Default)]
pub struct Gradients<F> {
    leaves: HashMap<usize, Vec<F>>,
    params: Vec<(ParamId, Vec<F>)>,
}

impl<F: Real> Gradients<F> {
    /// Gradient of a non-parameter leaf; `None` when it does not require one.
    pub fn wrt(&self, v: Var) -> Option<&[F]> {
        self.leaves.get(&v.0).map(Vec::as_slice)
    }

    pub fn param(&self, id: ParamId) -> Option<&[F]> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, g)| g.as_slice())
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[F])> {
        self.params.iter().map(|(id, g)| (*id, g.as_slice()))
    }
}

/// The tape: nodes are appended in evaluation order, so every node's inputs
/// precede it.
pub struct Graph<'p, F> {
    params: Option<&'p ParamStore<F>>,
    nodes: Vec<Node<F>>,
    param_nodes: HashMap<ParamId, Var>,
    track: bool,
}

impl<'p, F: Real> Graph<'p, F> {
    /// A graph over free leaves only.
    pub fn new() -> Self {
        Graph {
            params: None,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            track: true,
        }
    }

    pub fn with_params(params: &'p ParamStore<F>) -> Self {
        Graph {
            params: Some(params),
            ..Graph::new()
        }
    }

    /// A graph that never records gradient bookkeeping.
    pub fn inference(params: &'p ParamStore<F>) -> Self {
        Graph {
            track: false,
            ..Graph::with_params(params)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.store().value(*id),
        }
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn store(&self) -> &'p ParamStore<F> {
        self.params.expect("graph has no parameter store")
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, inputs: &[Var]) -> Var {
        let requires_grad = self.track && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
            requires_grad: requires_grad && self.track,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.leaf(value, false)
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes.get(&id) {
            return *v;
        }
        let requires_grad = self.track && self.store().get(id).requires_grad;
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Leaf,
            requires_grad,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    fn dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let t = self.value(v);
        t.dims2()
            .ok_or_else(|| Error::dim(op, format!("expected a matrix, got shape {:?}", t.shape())))
    }

    /// Dispatches a primitive by kind.
    pub fn apply(&mut self, kind: &Primitive, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(Error::Contract(format!(
                    "{kind:?} takes {n} input(s), got {}",
                    inputs.len()
                )))
            }
        };
        match kind {
            Primitive::MatMul => {
                arity(2)?;
                self.matmul(inputs[0], inputs[1])
            }
            Primitive::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            Primitive::Mul => {
                arity(2)?;
                self.mul(inputs[0], inputs[1])
            }
            Primitive::Concat { axis } => self.concat(inputs, *axis),
            Primitive::Tanh => {
                arity(1)?;
                Ok(self.tanh(inputs[0]))
            }
            Primitive::Sigmoid => {
                arity(1)?;
                Ok(self.sigmoid(inputs[0]))
            }
            Primitive::MaskedSoftmax { mask } => {
                arity(1)?;
                self.masked_softmax(inputs[0], mask)
            }
            Primitive::MeanOverTime { mask } => {
                arity(1)?;
                self.mean_over_time(inputs[0], mask)
            }
            Primitive::MaxOverTime { mask } => {
                arity(1)?;
                self.max_over_time(inputs[0], mask)
            }
            Primitive::EmbeddingLookup { indices, padding } => {
                arity(1)?;
                self.embedding(inputs[0], indices, *padding)
            }
            Primitive::Slice { axis, start, len } => {
                arity(1)?;
                self.slice(inputs[0], *axis, *start, *len)
            }
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims("matmul", a)?;
        let (k2, n) = self.dims("matmul", b)?;
        if k != k2 {
            return Err(Error::dim("matmul", format!("[{m}, {k}] x [{k2}, {n}]")));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = ad[i * k + p];
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &y) in row.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        let t = Tensor::matrix(m, n, out)?;
        Ok(self.push(t, Op::MatMul(a, b), &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(F, F) -> F) -> Tensor<F> {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    /// Elementwise sum. A right operand with one row per column count is
    /// broadcast over the rows of the left operand (bias addition).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() == self.value(b).shape() {
            let t = self.zip_with(a, b, |x, y| x + y);
            return Ok(self.push(t, Op::Add(a, b), &[a, b]));
        }
        let (m, n) = self.dims("add", a)?;
        let bl = self.value(b).len();
        let b_is_row = matches!(self.value(b).dims2(), Some((1, c)) if c == n);
        if !b_is_row || bl != n {
            return Err(Error::dim(
                "add",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let bd = self.value(b).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bd).map(|(&x, &y)| x + y))
            .collect();
        let t = Tensor::matrix(m, n, data)?;
        Ok(self.push(t, Op::AddRow(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let t = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let t = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let ta = self.value(a);
        let t = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| x * c).collect()).expect("same shape");
        self.push(t, Op::Scale(a, c), &[a])
    }

    fn map(&mut self, a: Var, f: impl Fn(F) -> F) -> Tensor<F> {
        let ta = self.value(a);
        Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect()).expect("same shape")
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.map(a, F::tanh);
        self.push(t, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.map(a, sigmoid);
        self.push(t, Op::Sigmoid(a), &[a])
    }

    /// Concatenates matrices along rows (`axis = 0`) or columns (`axis = 1`).
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::Contract("concat of zero tensors".into()));
        }
        let dims = inputs
            .iter()
            .map(|&v| self.dims("concat", v))
            .collect::<Result<Vec<_>>>()?;
        let t = match axis {
            0 => {
                let cols = dims[0].1;
                if dims.iter().any(|d| d.1 != cols) {
                    return Err(Error::dim("concat", format!("axis 0 over shapes {dims:?}")));
                }
                let rows = dims.iter().map(|d| d.0).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for &v in inputs {
                    data.extend_from_slice(self.value(v).data());
                }
                Tensor::matrix(rows, cols, data)?
            }
            1 => {
                let rows = dims[0].0;
                if dims.iter().any(|d| d.0 != rows) {
                    return Err(Error::dim("concat", format!("axis 1 over shapes {dims:?}")));
                }
                let cols = dims.iter().map(|d| d.1).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for (&v, d) in inputs.iter().zip(&dims) {
                        data.extend_from_slice(&self.value(v).data()[r * d.1..(r + 1) * d.1]);
                    }
                }
                Tensor::matrix(rows, cols, data)?
            }
            _ => return Err(Error::dim("concat", format!("axis {axis} out of range"))),
        };
        Ok(self.push(
            t,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
        ))
    }

    /// Row-wise softmax restricted to unmasked columns; masked columns get
    /// exactly zero.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let (m, n) = self.dims("masked_softmax", a)?;
        if mask.len() != n {
            return Err(Error::dim(
                "masked_softmax",
                format!("mask of length {} for rows of width {n}", mask.len()),
            ));
        }
        if !mask.iter().any(|&k| k) {
            return Err(Error::DegenerateMask { op: "masked_softmax" });
        }
        let ad = self.value(a).data();
        let mut out = vec![F::zero(); m * n];
        for r in 0..m {
            let row = &ad[r * n..(r + 1) * n];
            let max = row
                .iter()
                .zip(mask)
                .filter(|(_, &k)| k)
                .map(|(&x, _)| x)
                .fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for j in 0..n {
                if mask[j] {
                    let e = (row[j] - max).exp();
                    out[r * n + j] = e;
                    total += e;
                }
            }
            for j in 0..n {
                out[r * n + j] = out[r * n + j] / total;
            }
        }
        let t = Tensor::new(self.value(a).shape().to_vec(), out)?;
        Ok(self.push(t, Op::MaskedSoftmax(a), &[a]))
    }

    /// Mean of the unmasked rows of a `T × D` matrix, as a `1 × D` row.
    pub fn mean_over_time(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let (t, d) = self.time_dims("mean_over_time", a, mask)?;
        let count = mask.iter().filter(|&&k| k).count();
        let ad = self.value(a).data();
        let mut out = vec![F::zero(); d];
        for r in (0..t).filter(|&r| mask[r]) {
            for (o, &x) in out.iter_mut().zip(&ad[r * d..(r + 1) * d]) {
                *o += x;
            }
        }
        let denom = F::of(count as f64);
        out.iter_mut().for_each(|o| *o = *o / denom);
        let tensor = Tensor::row(out);
        Ok(self.push(
            tensor,
            Op::MeanOverTime {
                input: a,
                mask: mask.to_vec(),
                count,
            },
            &[a],
        ))
    }

    /// Column-wise maximum over unmasked rows; ties resolve to the earliest row.
    pub fn max_over_time(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let (t, d) = self.time_dims("max_over_time", a, mask)?;
        let ad = self.value(a).data();
        let first = mask.iter().position(|&k| k).expect("checked non-empty");
        let mut argmax = vec![first; d];
        let mut out = ad[first * d..(first + 1) * d].to_vec();
        for r in (first + 1..t).filter(|&r| mask[r]) {
            for c in 0..d {
                let x = ad[r * d + c];
                if x > out[c] {
                    out[c] = x;
                    argmax[c] = r;
                }
            }
        }
        let tensor = Tensor::row(out);
        Ok(self.push(tensor, Op::MaxOverTime { input: a, argmax }, &[a]))
    }

    fn time_dims(&self, op: &'static str, a: Var, mask: &[bool]) -> Result<(usize, usize)> {
        let (t, d) = self.dims(op, a)?;
        if mask.len() != t {
            return Err(Error::dim(
                op,
                format!("mask of length {} for {t} time steps", mask.len()),
            ));
        }
        if !mask.iter().any(|&k| k) {
            return Err(Error::DegenerateMask { op });
        }
        Ok((t, d))
    }

    /// Gathers rows of a `V × D` table. Rows looked up at the padding index
    /// never receive gradient.
    pub fn embedding(&mut self, table: Var, indices: &[usize], padding: Option<usize>) -> Result<Var> {
        let (v, d) = self.dims("embedding_lookup", table)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(Error::dim(
                "embedding_lookup",
                format!("index {bad} out of range for {v} rows"),
            ));
        }
        let td = self.value(table).data();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(&td[i * d..(i + 1) * d]);
        }
        let t = Tensor::matrix(indices.len(), d, data)?;
        Ok(self.push(
            t,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
                padding,
            },
            &[table],
        ))
    }

    /// Rows (`axis = 0`) or columns (`axis = 1`) `start .. start + len`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims("slice", a)?;
        let extent = match axis {
            0 => m,
            1 => n,
            _ => return Err(Error::dim("slice", format!("axis {axis} out of range"))),
        };
        if start + len > extent || len == 0 {
            return Err(Error::dim(
                "slice",
                format!("range {start}..{} on axis {axis} of [{m}, {n}]", start + len),
            ));
        }
        let ad = self.value(a).data();
        let t = if axis == 0 {
            Tensor::matrix(len, n, ad[start * n..(start + len) * n].to_vec())?
        } else {
            let mut data = Vec::with_capacity(m * len);
            for r in 0..m {
                data.extend_from_slice(&ad[r * n + start..r * n + start + len]);
            }
            Tensor::matrix(m, len, data)?
        };
        Ok(self.push(t, Op::Slice { input: a, axis, start }, &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        let t = Tensor::new(shape.to_vec(), ta.data().to_vec())
            .map_err(|_| Error::dim("reshape", format!("{:?} -> {shape:?}", ta.shape())))?;
        Ok(self.push(t, Op::Reshape(a), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Negative log-likelihood of `target` under the softmax of a `1 × C`
    /// logit row.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let (r, c) = self.dims("softmax_cross_entropy", logits)?;
        if r != 1 || target >= c {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("target {target} for logits [{r}, {c}]"),
            ));
        }
        let z = self.value(logits).data();
        let max = z.iter().copied().fold(F::neg_infinity(), F::max);
        let exps: Vec<F> = z.iter().map(|&x| (x - max).exp()).collect();
        let total: F = exps.iter().copied().sum();
        let probs: Vec<F> = exps.iter().map(|&e| e / total).collect();
        let loss = total.ln() + max - z[target];
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy { logits, target, probs },
            &[logits],
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<F>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients::default());
        }
        grads[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gout) = grads[i].take() else { continue };
            self.propagate(i, &gout, &mut grads);
            // Leaves keep their gradient for collection below.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(gout);
            }
        }

        let mut out = Gradients::default();
        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &self.nodes[i];
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            match node.value {
                Value::Param(id) => out.params.push((id, g)),
                Value::Owned(_) => {
                    out.leaves.insert(i, g);
                }
            }
        }
        out.params.sort_by_key(|(id, _)| *id);
        Ok(out)
    }

    fn propagate(&self, i: usize, gout: &[F], grads: &mut [Option<Vec<F>>]) {
        let out = self.value(Var(i));
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matrix");
                let n = out.dims2().expect("matrix").1;
                if self.wants(*a) {
                    let bd = self.value(*b).data();
                    let ga = self.slot(grads, *a);
                    for r in 0..m {
                        let grow = &gout[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let mut s = F::zero();
                            for (&x, &y) in grow.iter().zip(brow) {
                                s += x * y;
                            }
                            ga[r * k + p] += s;
                        }
                    }
                }
                if self.wants(*b) {
                    let ad = self.value(*a).data();
                    let gb = self.slot(grads, *b);
                    for r in 0..m {
                        let grow = &gout[r * n..(r + 1) * n];
                        for p in 0..k {
                            let x = ad[r * k + p];
                            for (o, &y) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += x * y;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, |j| gout[j]);
                self.acc(grads, *b, |j| gout[j]);
            }
            Op::AddRow(a, b) => {
                self.acc(grads, *a, |j| gout[j]);
                if self.wants(*b) {
                    let n = self.value(*b).len();
                    let gb = self.slot(grads, *b);
                    for row in gout.chunks(n) {
                        for (o, &g) in gb.iter_mut().zip(row) {
                            *o += g;
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, |j| gout[j]);
                self.acc(grads, *b, |j| -gout[j]);
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                self.acc(grads, *a, |j| gout[j] * bd[j]);
                self.acc(grads, *b, |j| gout[j] * ad[j]);
            }
            Op::Scale(a, c) => self.acc(grads, *a, |j| gout[j] * *c),
            Op::Concat { inputs, axis } => {
                let (rows, cols) = out.dims2().expect("matrix");
                let mut offset = 0;
                for &v in inputs {
                    let (vr, vc) = self.value(v).dims2().expect("matrix");
                    if *axis == 0 {
                        let base = offset * cols;
                        self.acc(grads, v, |j| gout[base + j]);
                        offset += vr;
                    } else {
                        let base = offset;
                        self.acc(grads, v, |j| gout[(j / vc) * cols + base + j % vc]);
                        offset += vc;
                    }
                    debug_assert!(*axis == 1 || offset <= rows);
                }
            }
            Op::Tanh(a) => {
                let y = out.data();
                self.acc(grads, *a, |j| gout[j] * (F::one() - y[j] * y[j]));
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                self.acc(grads, *a, |j| gout[j] * y[j] * (F::one() - y[j]));
            }
            Op::MaskedSoftmax(a) => {
                let (m, n) = out.dims2().expect("matrix");
                let y = out.data();
                let mut dots = vec![F::zero(); m];
                for r in 0..m {
                    for j in 0..n {
                        dots[r] += y[r * n + j] * gout[r * n + j];
                    }
                }
                self.acc(grads, *a, |j| y[j] * (gout[j] - dots[j / n]));
            }
            Op::MeanOverTime { input, mask, count } => {
                let d = out.len();
                let denom = F::of(*count as f64);
                self.acc(
                    grads,
                    *input,
                    |j| {
                        if mask[j / d] {
                            gout[j % d] / denom
                        } else {
                            F::zero()
                        }
                    },
                );
            }
            Op::MaxOverTime { input, argmax } => {
                if self.wants(*input) {
                    let d = argmax.len();
                    let gi = self.slot(grads, *input);
                    for (c, &r) in argmax.iter().enumerate() {
                        gi[r * d + c] += gout[c];
                    }
                }
            }
            Op::Embedding {
                table,
                indices,
                padding,
            } => {
                if self.wants(*table) {
                    let d = out.dims2().expect("matrix").1;
                    let gt = self.slot(grads, *table);
                    for (row, &idx) in indices.iter().enumerate() {
                        if Some(idx) == *padding {
                            continue;
                        }
                        for (o, &g) in gt[idx * d..(idx + 1) * d].iter_mut().zip(&gout[row * d..(row + 1) * d]) {
                            *o += g;
                        }
                    }
                }
            }
            Op::Slice { input, axis, start } => {
                if self.wants(*input) {
                    let (om, on) = out.dims2().expect("matrix");
                    let n = self.value(*input).dims2().expect("matrix").1;
                    let gi = self.slot(grads, *input);
                    if *axis == 0 {
                        for (o, &g) in gi[start * n..(start + om) * n].iter_mut().zip(gout) {
                            *o += g;
                        }
                    } else {
                        for r in 0..om {
                            for c in 0..on {
                                gi[r * n + start + c] += gout[r * on + c];
                            }
                        }
                    }
                }
            }
            Op::Reshape(a) => self.acc(grads, *a, |j| gout[j]),
            Op::Sum(a) => self.acc(grads, *a, |_| gout[0]),
            Op::SoftmaxCrossEntropy { logits, target, probs } => {
                self.acc(grads, *logits, |j| {
                    let hot = if j == *target { F::one() } else { F::zero() };
                    (probs[j] - hot) * gout[0]
                });
            }
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<F>>], v: Var) -> &'g mut Vec<F> {
        let n = self.value(v).len();
        grads[v.0].get_or_insert_with(|| vec![F::zero(); n])
    }

    fn acc(&self, grads: &mut [Option<Vec<F>>], v: Var, f: impl Fn(usize) -> F) {
        if !self.wants(v) {
            return;
        }
        let g = self.slot(grads, v);
        for (j, o) in g.iter_mut().enumerate() {
            *o += f(j);
        }
    }
}

impl<F: Real> Default for Graph<'_, F> {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}
