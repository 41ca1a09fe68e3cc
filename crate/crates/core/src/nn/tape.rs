//! Reverse-mode automatic differentiation over [`Tensor`] values.

use std::rc::Rc;

use super::params::{ParamId, ParamStore};
use super::tensor::{gemm_nt, gemm_tn};
use super::{NnError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;
const NORM_EPS: f64 = 1e-12;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Tensor, inv_std: Vec<f64> },
    Relu(Var),
    Gelu(Var),
    Embedding { table: Var, ids: Vec<usize> },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SelectRows { x: Var, rows: Vec<usize> },
    MeanRows(Var),
    Sum(Var),
    Transpose(Var),
    NormalizeRows { x: Var, norms: Vec<f64> },
    RowDot(Var, Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Tensor },
    BceWithLogits { logits: Var, targets: Rc<Tensor> },
    Mse { pred: Var, target: Rc<Tensor> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation for one backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Adds parameter gradients into the store (accumulating).
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, v) in &self.params {
            if let Some(g) = &self.grads[v.0] {
                store.grad_mut(id).add_assign(g);
            }
        }
    }
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> NnError {
    NnError::ShapeMismatch(format!(
        "{what}: {}x{} vs {}x{}",
        a.rows(),
        a.cols(),
        b.rows(),
        b.cols()
    ))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor) -> Result<Var, NnError> {
        if !t.is_finite() {
            return Err(NnError::NonFiniteInput);
        }
        Ok(self.push(t, Op::Leaf, false))
    }

    /// A differentiable input that is not a stored parameter.
    pub fn input(&mut self, t: Tensor) -> Result<Var, NnError> {
        if !t.is_finite() {
            return Err(NnError::NonFiniteInput);
        }
        Ok(self.push(t, Op::Leaf, true))
    }

    /// Records a parameter once per tape; later calls return the same var.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var, NnError> {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return Ok(v);
        }
        let v = self.input(store.value(id).clone())?;
        self.params.push((id, v));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.value(a).matmul(self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: fn(f64, f64) -> f64) -> Result<Tensor, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(what, x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::from_vec(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.zip(a, b, "add", |p, q| p + q)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.zip(a, b, "sub", |p, q| p - q)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.zip(a, b, "mul", |p, q| p * q)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, NnError> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row", x, b));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (o, &y) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o += y;
            }
        }
        let ng = self.ng(&[a, bias]);
        Ok(self.push(out, Op::AddRow(a, bias), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, NnError> {
        if !s.is_finite() {
            return Err(NnError::NonFiniteInput);
        }
        let out = self.value(a).map(|x| x * s);
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::Scale(a, s), ng))
    }

    /// Row-wise softmax. With `allowed`, entries where it is `false` get
    /// weight exactly zero; a row with nothing allowed is all zeros.
    pub fn softmax_rows(&mut self, a: Var, allowed: Option<&[bool]>) -> Result<Var, NnError> {
        let x = self.value(a);
        if let Some(mask) = allowed {
            if mask.len() != x.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "softmax mask of {} for {} entries",
                    mask.len(),
                    x.len()
                )));
            }
        }
        let mut out = Tensor::zeros(x.rows(), x.cols());
        let cols = x.cols();
        for r in 0..x.rows() {
            let ok = |c: usize| allowed.is_none_or(|m| m[r * cols + c]);
            let row = x.row(r);
            let max = (0..cols)
                .filter(|&c| ok(c))
                .map(|c| row[c])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let orow = out.row_mut(r);
            let mut sum = 0.0;
            for c in 0..cols {
                if ok(c) {
                    orow[c] = (row[c] - max).exp();
                    sum += orow[c];
                }
            }
            for o in orow.iter_mut() {
                *o /= sum;
            }
        }
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::Softmax(a), ng))
    }

    /// Per-row normalization to zero mean and unit variance, then `γ ⊙ x̂ + β`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NnError> {
        let (xv, g, b) = (self.value(x), self.value(gamma), self.value(beta));
        let c = xv.cols();
        if g.shape() != [1, c] || b.shape() != [1, c] {
            return Err(shape_err("layer_norm", xv, g));
        }
        let mut xhat = Tensor::zeros(xv.rows(), c);
        let mut out = Tensor::zeros(xv.rows(), c);
        let mut inv_std = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            for j in 0..c {
                let h = (row[j] - mean) * inv;
                xhat.set(r, j, h);
                out.set(r, j, h * g.data()[j] + b.data()[j]);
            }
        }
        let ng = self.ng(&[x, gamma, beta]);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NnError> {
        let out = self.value(a).map(|x| x.max(0.0));
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::Relu(a), ng))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Result<Var, NnError> {
        let out = self
            .value(a)
            .map(|x| 0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh()));
        let ng = self.ng(&[a]);
        Ok(self.push(out, Op::Gelu(a), ng))
    }

    /// Rows `ids` of `table`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, NnError> {
        let t = self.value(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(NnError::ShapeMismatch(format!(
                "embedding id {bad} for a table of {} rows",
                t.rows()
            )));
        }
        let mut out = Tensor::zeros(ids.len(), t.cols());
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(i));
        }
        let ng = self.ng(&[table]);
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            ng,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(shape_err("concat_rows", self.value(parts[0]), t));
            }
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let ng = self.ng(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]), t));
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = &self.nodes[p.0].value;
            for r in 0..rows {
                out.row_mut(r)[offset..offset + t.cols()].copy_from_slice(t.row(r));
            }
            offset += t.cols();
        }
        let ng = self.ng(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if start + len > t.cols() {
            return Err(NnError::ShapeMismatch(format!(
                "columns {start}..{} of {}",
                start + len,
                t.cols()
            )));
        }
        let mut out = Tensor::zeros(t.rows(), len);
        for r in 0..t.rows() {
            out.row_mut(r).copy_from_slice(&t.row(r)[start..start + len]);
        }
        let ng = self.ng(&[x]);
        Ok(self.push(out, Op::SliceCols { x, start }, ng))
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= t.rows()) {
            return Err(NnError::ShapeMismatch(format!("row {bad} of {}", t.rows())));
        }
        let mut out = Tensor::zeros(rows.len(), t.cols());
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(r));
        }
        let ng = self.ng(&[x]);
        Ok(self.push(
            out,
            Op::SelectRows {
                x,
                rows: rows.to_vec(),
            },
            ng,
        ))
    }

    /// Column means as a `1 × c` row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let t = self.value(x);
        if t.rows() == 0 {
            return Err(NnError::ShapeMismatch("mean of zero rows".into()));
        }
        let mut out = Tensor::zeros(1, t.cols());
        for r in 0..t.rows() {
            for (o, &v) in out.data_mut().iter_mut().zip(t.row(r)) {
                *o += v;
            }
        }
        let n = t.rows() as f64;
        for o in out.data_mut() {
            *o /= n;
        }
        let ng = self.ng(&[x]);
        Ok(self.push(out, Op::MeanRows(x), ng))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NnError> {
        let s = self.value(x).data().iter().sum();
        let ng = self.ng(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::Sum(x), ng))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, NnError> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(NnError::ShapeMismatch("mean of empty tensor".into()));
        }
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, NnError> {
        let out = self.value(x).transpose();
        let ng = self.ng(&[x]);
        Ok(self.push(out, Op::Transpose(x), ng))
    }

    /// Each row divided by its Euclidean norm.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let t = self.value(x);
        let mut out = t.clone();
        let mut norms = Vec::with_capacity(t.rows());
        for r in 0..t.rows() {
            let norm = t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_EPS);
            norms.push(norm);
            for v in out.row_mut(r) {
                *v /= norm;
            }
        }
        let ng = self.ng(&[x]);
        Ok(self.push(out, Op::NormalizeRows { x, norms }, ng))
    }

    /// Per-row dot products as an `r × 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("row_dot", x, y));
        }
        let data = (0..x.rows())
            .map(|r| x.row(r).iter().zip(y.row(r)).map(|(p, q)| p * q).sum())
            .collect();
        let out = Tensor::from_vec(x.rows(), 1, data)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::RowDot(a, b), ng))
    }

    /// Row-wise cosine similarity as an `r × 1` column.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let na = self.normalize_rows(a)?;
        let nb = self.normalize_rows(b)?;
        self.row_dot(na, nb)
    }

    /// Mean softmax cross-entropy of each logit row against its class index.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, NnError> {
        let x = self.value(logits);
        if x.rows() != targets.len() || x.rows() == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "{} targets for {} logit rows",
                targets.len(),
                x.rows()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= x.cols()) {
            return Err(NnError::ShapeMismatch(format!(
                "class {bad} of {}",
                x.cols()
            )));
        }
        let mut probs = Tensor::zeros(x.rows(), x.cols());
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = x.row(r);
            let (top, max) = row
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, v)| if v > best.1 { (j, v) } else { best });
            let rest: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != top)
                .map(|(_, v)| (v - max).exp())
                .sum();
            let tail = rest.ln_1p();
            let lse = max + tail;
            total += (max - row[t]) + tail;
            for (p, &v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let loss = total / targets.len() as f64;
        let ng = self.ng(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            ng,
        ))
    }

    /// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Tensor) -> Result<Var, NnError> {
        let x = self.value(logits);
        if x.shape() != targets.shape() || x.is_empty() {
            return Err(shape_err("bce_with_logits", x, &targets));
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum();
        let loss = total / x.len() as f64;
        let ng = self.ng(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits {
                logits,
                targets: Rc::new(targets),
            },
            ng,
        ))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: Tensor) -> Result<Var, NnError> {
        let x = self.value(pred);
        if x.shape() != target.shape() || x.is_empty() {
            return Err(shape_err("mse", x, &target));
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let loss = total / x.len() as f64;
        let ng = self.ng(&[pred]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: Rc::new(target),
            },
            ng,
        ))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        if self.value(loss).shape() != [1, 1] {
            return Err(NnError::NotScalarLoss);
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let val = |v: Var| &nodes[v.0].value;
        let mut acc = |v: Var, f: &dyn Fn(&mut Tensor)| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| {
                let t = &nodes[v.0].value;
                Tensor::zeros(t.rows(), t.cols())
            });
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, &|s| gemm_nt(g, val(*b), s));
                acc(*b, &|s| gemm_tn(val(*a), g, s));
            }
            Op::Add(a, b) => {
                acc(*a, &|s| s.add_assign(g));
                acc(*b, &|s| s.add_assign(g));
            }
            Op::Sub(a, b) => {
                acc(*a, &|s| s.add_assign(g));
                acc(*b, &|s| {
                    for (o, &d) in s.data_mut().iter_mut().zip(g.data()) {
                        *o -= d;
                    }
                });
            }
            Op::Mul(a, b) => {
                acc(*a, &|s| {
                    for ((o, &d), &y) in s.data_mut().iter_mut().zip(g.data()).zip(val(*b).data()) {
                        *o += d * y;
                    }
                });
                acc(*b, &|s| {
                    for ((o, &d), &x) in s.data_mut().iter_mut().zip(g.data()).zip(val(*a).data()) {
                        *o += d * x;
                    }
                });
            }
            Op::AddRow(a, bias) => {
                acc(*a, &|s| s.add_assign(g));
                acc(*bias, &|s| {
                    for r in 0..g.rows() {
                        for (o, &d) in s.data_mut().iter_mut().zip(g.row(r)) {
                            *o += d;
                        }
                    }
                });
            }
            Op::Scale(a, k) => acc(*a, &|s| {
                for (o, &d) in s.data_mut().iter_mut().zip(g.data()) {
                    *o += k * d;
                }
            }),
            Op::Softmax(a) => {
                let y = &node.value;
                acc(*a, &|s| {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((o, &p), &q) in s.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o += p * (q - dot);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gm = val(*gamma);
                let c = xhat.cols();
                acc(*x, &|s| {
                    for r in 0..xhat.rows() {
                        let (h, gr) = (xhat.row(r), g.row(r));
                        let dh: Vec<f64> = gr.iter().zip(gm.data()).map(|(d, w)| d * w).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 = dh.iter().zip(h).map(|(a, b)| a * b).sum();
                        let k = inv_std[r] / c as f64;
                        for (j, o) in s.row_mut(r).iter_mut().enumerate() {
                            *o += k * (c as f64 * dh[j] - sum_dh - h[j] * sum_dh_h);
                        }
                    }
                });
                acc(*gamma, &|s| {
                    for r in 0..xhat.rows() {
                        for ((o, &d), &h) in s.data_mut().iter_mut().zip(g.row(r)).zip(xhat.row(r)) {
                            *o += d * h;
                        }
                    }
                });
                acc(*beta, &|s| {
                    for r in 0..g.rows() {
                        for (o, &d) in s.data_mut().iter_mut().zip(g.row(r)) {
                            *o += d;
                        }
                    }
                });
            }
            Op::Relu(a) => acc(*a, &|s| {
                for ((o, &d), &x) in s.data_mut().iter_mut().zip(g.data()).zip(val(*a).data()) {
                    if x > 0.0 {
                        *o += d;
                    }
                }
            }),
            Op::Gelu(a) => acc(*a, &|s| {
                for ((o, &d), &x) in s.data_mut().iter_mut().zip(g.data()).zip(val(*a).data()) {
                    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
                    let dt = (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x);
                    *o += d * (0.5 * (1.0 + t) + 0.5 * x * dt);
                }
            }),
            Op::Embedding { table, ids } => acc(*table, &|s| {
                for (r, &i) in ids.iter().enumerate() {
                    for (o, &d) in s.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += d;
                    }
                }
            }),
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = val(p).rows();
                    acc(p, &|s| {
                        for r in 0..rows {
                            for (o, &d) in s.row_mut(r).iter_mut().zip(g.row(offset + r)) {
                                *o += d;
                            }
                        }
                    });
                    offset += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = val(p).cols();
                    acc(p, &|s| {
                        for r in 0..g.rows() {
                            for (o, &d) in s.row_mut(r).iter_mut().zip(&g.row(r)[offset..offset + cols]) {
                                *o += d;
                            }
                        }
                    });
                    offset += cols;
                }
            }
            Op::SliceCols { x, start } => acc(*x, &|s| {
                for r in 0..g.rows() {
                    for (o, &d) in s.row_mut(r)[*start..*start + g.cols()].iter_mut().zip(g.row(r)) {
                        *o += d;
                    }
                }
            }),
            Op::SelectRows { x, rows } => acc(*x, &|s| {
                for (i, &r) in rows.iter().enumerate() {
                    for (o, &d) in s.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += d;
                    }
                }
            }),
            Op::MeanRows(x) => {
                let n = val(*x).rows() as f64;
                acc(*x, &|s| {
                    for r in 0..s.rows() {
                        for (o, &d) in s.row_mut(r).iter_mut().zip(g.data()) {
                            *o += d / n;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let d = g.item();
                acc(*x, &|s| {
                    for o in s.data_mut() {
                        *o += d;
                    }
                });
            }
            Op::Transpose(x) => acc(*x, &|s| s.add_assign(&g.transpose())),
            Op::NormalizeRows { x, norms } => {
                let y = &node.value;
                acc(*x, &|s| {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((o, &p), &q) in s.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o += (q - p * dot) / norms[r];
                        }
                    }
                });
            }
            Op::RowDot(a, b) => {
                for (v, other) in [(*a, *b), (*b, *a)] {
                    acc(v, &|s| {
                        let o_val = val(other);
                        for r in 0..s.rows() {
                            let d = g.data()[r];
                            for (o, &y) in s.row_mut(r).iter_mut().zip(o_val.row(r)) {
                                *o += d * y;
                            }
                        }
                    });
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let k = g.item() / targets.len() as f64;
                acc(*logits, &|s| {
                    for (r, &t) in targets.iter().enumerate() {
                        for (o, &p) in s.row_mut(r).iter_mut().zip(probs.row(r)) {
                            *o += k * p;
                        }
                        s.row_mut(r)[t] -= k;
                    }
                });
            }
            Op::BceWithLogits { logits, targets } => {
                let x = val(*logits);
                let k = g.item() / x.len() as f64;
                acc(*logits, &|s| {
                    for ((o, &z), &t) in s.data_mut().iter_mut().zip(x.data()).zip(targets.data()) {
                        *o += k * (sigmoid(z) - t);
                    }
                });
            }
            Op::Mse { pred, target } => {
                let x = val(*pred);
                let k = 2.0 * g.item() / x.len() as f64;
                acc(*pred, &|s| {
                    for ((o, &p), &t) in s.data_mut().iter_mut().zip(x.data()).zip(target.data()) {
                        *o += k * (p - t);
                    }
                });
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
