//! Minimal reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation in evaluation order; [`Tape::backward`]
//! walks it in reverse and accumulates gradients. The op set is exactly what
//! the toy transformer, the contrastive objective and the classification
//! heads need.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, Matrix};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    MulConst(Var, Matrix),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Matrix, inv_std: Vec<f64> },
    MaskedSoftmax { x: Var, valid: usize },
    Gather { table: Var, ids: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Row { x: Var, row: usize },
    StackRows(Vec<Var>),
    RowNormalize { x: Var, norms: Vec<f64> },
    InfoNce { sim: Var, tau: f64, include_positive: bool, probs: Matrix },
    SoftmaxXent { logits: Var, targets: Vec<usize>, probs: Matrix },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, or zeros of `shape` when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
    match slot {
        Some(g) => g.add_assign(&delta),
        None => *slot = Some(delta),
    }
}

/// Row-wise softmax over the first `valid` columns; the remaining columns are 0.
pub fn masked_softmax_rows(x: &Matrix, valid: usize) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = &x.row(r)[..valid];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let out_row = out.row_mut(r);
        for (o, &v) in out_row.iter_mut().zip(row) {
            *o = libm::exp(v - max);
            sum += *o;
        }
        for o in &mut out_row[..valid] {
            *o /= sum;
        }
    }
    out
}

pub fn softmax_rows(x: &Matrix) -> Matrix {
    masked_softmax_rows(x, x.cols())
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

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable input.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_nt(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMulNt(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    /// Adds the `1 × c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.rows(), 1, "bias must be a row vector");
        assert_eq!(b.cols(), self.value(a).cols(), "bias width mismatch");
        let mut value = self.value(a).clone();
        let b = self.value(bias).as_slice().to_vec();
        for r in 0..value.rows() {
            for (x, y) in value.row_mut(r).iter_mut().zip(&b) {
                *x += y;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        self.push(value, Op::AddRow(a, bias), rg)
    }

    /// `x · w + b`
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    /// Elementwise product with a constant matrix (dropout masks).
    pub fn mul_const(&mut self, a: Var, m: Matrix) -> Var {
        let av = self.value(a);
        assert_eq!(av.shape(), m.shape(), "mul_const shape mismatch");
        let data = av.as_slice().iter().zip(m.as_slice()).map(|(x, y)| x * y).collect();
        let value = Matrix::from_vec(av.rows(), av.cols(), data);
        let rg = self.rg(a);
        self.push(value, Op::MulConst(a, m), rg)
    }

    /// Row-wise layer normalisation with learned `1 × c` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
            for (h, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *h = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let g = self.value(gain).as_slice();
        let b = self.value(bias).as_slice();
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let h = xhat.row(r);
            for (c, o) in value.row_mut(r).iter_mut().enumerate() {
                *o = h[c] * g[c] + b[c];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        self.push(value, Op::LayerNorm { x, gain, bias, xhat, inv_std }, rg)
    }

    /// Row-wise softmax restricted to the first `valid` columns (a prefix key mask).
    pub fn masked_softmax(&mut self, x: Var, valid: usize) -> Var {
        assert!(valid >= 1 && valid <= self.value(x).cols(), "invalid mask width");
        let value = masked_softmax_rows(self.value(x), valid);
        let rg = self.rg(x);
        self.push(value, Op::MaskedSoftmax { x, valid }, rg)
    }

    /// Rows of `table` picked by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let value = self.value(table).select_rows(ids);
        let rg = self.rg(table);
        self.push(value, Op::Gather { table, ids: ids.to_vec() }, rg)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        assert!(start + len <= xv.cols(), "column slice out of range");
        let mut value = Matrix::zeros(xv.rows(), len);
        for r in 0..xv.rows() {
            value.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        let rg = self.rg(x);
        self.push(value, Op::SliceCols { x, start }, rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows(), rows, "concat_cols row mismatch");
                value.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
                off += pv.cols();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn row(&mut self, x: Var, row: usize) -> Var {
        let value = Matrix::row_vector(self.value(x).row(row));
        let rg = self.rg(x);
        self.push(value, Op::Row { x, row }, rg)
    }

    /// Vertical concatenation.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols(), cols, "stack_rows column mismatch");
            data.extend_from_slice(pv.as_slice());
            rows += pv.rows();
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Matrix::from_vec(rows, cols, data), Op::StackRows(parts.to_vec()), rg)
    }

    /// Scales every row to unit L2 norm; rows with norm `<= eps` become zero.
    pub fn row_normalize(&mut self, x: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let mut value = xv.clone();
        let mut norms = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let n = libm::sqrt(dot(xv.row(r), xv.row(r)));
            let out = value.row_mut(r);
            if n <= eps {
                out.iter_mut().for_each(|v| *v = 0.0);
                norms.push(0.0);
            } else {
                out.iter_mut().for_each(|v| *v /= n);
                norms.push(n);
            }
        }
        let rg = self.rg(x);
        self.push(value, Op::RowNormalize { x, norms }, rg)
    }

    /// Mean in-batch-negative contrastive loss over a square similarity matrix.
    pub fn info_nce(&mut self, sim: Var, tau: f64, include_positive: bool) -> Var {
        let s = self.value(sim);
        let (loss, probs) = crate::contrastive::info_nce_forward(s, tau, include_positive);
        let rg = self.rg(sim);
        self.push(Matrix::filled(1, 1, loss), Op::InfoNce { sim, tau, include_positive, probs }, rg)
    }

    /// Mean softmax cross-entropy of `logits` rows against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows(), targets.len(), "one target per row");
        let probs = softmax_rows(lv);
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            loss += lse - row[t];
        }
        loss /= targets.len() as f64;
        let rg = self.rg(logits);
        self.push(
            Matrix::filled(1, 1, loss),
            Op::SoftmaxXent { logits, targets: targets.to_vec(), probs },
            rg,
        )
    }

    /// Reverse pass from a scalar (`1 × 1`) output.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.propagate(node, &g, &mut grads);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], g.matmul_nt(self.value(*b)));
                }
                if self.rg(*b) {
                    accumulate(&mut grads[b.0], self.value(*a).matmul_tn(g));
                }
            }
            Op::MatMulNt(a, b) => {
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], g.matmul(self.value(*b)));
                }
                if self.rg(*b) {
                    accumulate(&mut grads[b.0], g.matmul_tn(self.value(*a)));
                }
            }
            Op::Add(a, b) => {
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.rg(*b) {
                    accumulate(&mut grads[b.0], g.clone());
                }
            }
            Op::AddRow(a, bias) => {
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.rg(*bias) {
                    accumulate(&mut grads[bias.0], column_sums(g));
                }
            }
            Op::Relu(a) => {
                let out = &node.value;
                let data = g
                    .as_slice()
                    .iter()
                    .zip(out.as_slice())
                    .map(|(gv, &o)| if o > 0.0 { *gv } else { 0.0 })
                    .collect();
                accumulate(&mut grads[a.0], Matrix::from_vec(g.rows(), g.cols(), data));
            }
            Op::Scale(a, s) => accumulate(&mut grads[a.0], g.scale(*s)),
            Op::MulConst(a, m) => {
                let data = g.as_slice().iter().zip(m.as_slice()).map(|(x, y)| x * y).collect();
                accumulate(&mut grads[a.0], Matrix::from_vec(g.rows(), g.cols(), data));
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let gv = self.value(*gain).as_slice();
                let (rows, cols) = g.shape();
                if self.rg(*gain) {
                    let mut dg = Matrix::zeros(1, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            dg.as_mut_slice()[c] += g.get(r, c) * xhat.get(r, c);
                        }
                    }
                    accumulate(&mut grads[gain.0], dg);
                }
                if self.rg(*bias) {
                    accumulate(&mut grads[bias.0], column_sums(g));
                }
                if self.rg(*x) {
                    let n = cols as f64;
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        let dxhat: Vec<f64> = (0..cols).map(|c| g.get(r, c) * gv[c]).collect();
                        let sum_d: f64 = dxhat.iter().sum();
                        let sum_dx: f64 = dxhat.iter().zip(xhat.row(r)).map(|(a, b)| a * b).sum();
                        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = inv_std[r] / n * (n * dxhat[c] - sum_d - xhat.get(r, c) * sum_dx);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                }
            }
            Op::MaskedSoftmax { x, valid } => {
                let y = &node.value;
                let mut dx = Matrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let yr = &y.row(r)[..*valid];
                    let gr = &g.row(r)[..*valid];
                    let inner = dot(yr, gr);
                    for (c, o) in dx.row_mut(r)[..*valid].iter_mut().enumerate() {
                        *o = yr[c] * (gr[c] - inner);
                    }
                }
                accumulate(&mut grads[x.0], dx);
            }
            Op::Gather { table, ids } => {
                let tv = self.value(*table);
                let mut dt = Matrix::zeros(tv.rows(), tv.cols());
                for (r, &id) in ids.iter().enumerate() {
                    for (o, v) in dt.row_mut(id).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(&mut grads[table.0], dt);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..g.rows() {
                    dx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accumulate(&mut grads[x.0], dx);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if self.rg(p) {
                        let mut dp = Matrix::zeros(g.rows(), pc);
                        for r in 0..g.rows() {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[off..off + pc]);
                        }
                        accumulate(&mut grads[p.0], dp);
                    }
                    off += pc;
                }
            }
            Op::Row { x, row } => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                dx.row_mut(*row).copy_from_slice(g.row(0));
                accumulate(&mut grads[x.0], dx);
            }
            Op::StackRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pr = self.value(p).rows();
                    if self.rg(p) {
                        let cols = g.cols();
                        let slice = &g.as_slice()[off * cols..(off + pr) * cols];
                        accumulate(&mut grads[p.0], Matrix::from_vec(pr, cols, slice.to_vec()));
                    }
                    off += pr;
                }
            }
            Op::RowNormalize { x, norms } => {
                let y = &node.value;
                let mut dx = Matrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    if norms[r] == 0.0 {
                        continue;
                    }
                    let inner = dot(y.row(r), g.row(r));
                    for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
                        *o = (g.get(r, c) - y.get(r, c) * inner) / norms[r];
                    }
                }
                accumulate(&mut grads[x.0], dx);
            }
            Op::InfoNce { sim, tau, include_positive, probs } => {
                let upstream = g.get(0, 0);
                let ds = crate::contrastive::info_nce_grad_from_probs(probs, *tau, *include_positive)
                    .scale(upstream);
                accumulate(&mut grads[sim.0], ds);
            }
            Op::SoftmaxXent { logits, targets, probs } => {
                let scale = g.get(0, 0) / targets.len() as f64;
                let mut dl = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    let v = dl.get(r, t);
                    dl.set(r, t, v - 1.0);
                }
                accumulate(&mut grads[logits.0], dl.scale(scale));
            }
        }
    }
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, v) in out.as_mut_slice().iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Compares the tape gradient of every leaf against central differences.
    fn check(inputs: Vec<Matrix>, f: impl Fn(&mut Tape, &[Var]) -> Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().cloned().map(|m| tape.param(m)).collect();
        let out = f(&mut tape, &vars);
        let grads = tape.backward(out);
        let h = 1e-5;
        for (k, input) in inputs.iter().enumerate() {
            let analytic = grads.get_or_zeros(vars[k], input.shape());
            for idx in 0..input.as_slice().len() {
                let eval = |delta: f64| {
                    let mut perturbed = inputs.clone();
                    perturbed[k].as_mut_slice()[idx] += delta;
                    let mut t = Tape::new();
                    let vs: Vec<Var> = perturbed.into_iter().map(|m| t.param(m)).collect();
                    let o = f(&mut t, &vs);
                    t.value(o).get(0, 0)
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let a = analytic.as_slice()[idx];
                let denom = a.abs().max(numeric.abs()).max(1e-6);
                assert!((a - numeric).abs() / denom < 1e-4, "input {k}[{idx}]: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn attention_block_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs = vec![
            random(&mut rng, 5, 4),
            random(&mut rng, 4, 4),
            random(&mut rng, 1, 4),
            random(&mut rng, 1, 4),
            random(&mut rng, 4, 3),
        ];
        check(inputs, |t, v| {
            let ln = t.layer_norm(v[0], v[2], v[3]);
            let q = t.matmul(ln, v[1]);
            let s = t.matmul_nt(q, ln);
            let s = t.scale(s, 0.5);
            let a = t.masked_softmax(s, 3);
            let ctx = t.matmul(a, ln);
            let h = t.matmul(ctx, v[4]);
            let h = t.relu(h);
            let first = t.row(h, 0);
            let rest = t.slice_cols(h, 1, 2);
            let r1 = t.row(rest, 2);
            let cat = t.concat_cols(&[first, r1]);
            t.softmax_cross_entropy(cat, &[3])
        });
    }

    #[test]
    fn gather_normalize_and_contrastive_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs = vec![random(&mut rng, 6, 5), random(&mut rng, 4, 5)];
        check(inputs, |t, v| {
            let a = t.gather(v[0], &[0, 3, 3, 5]);
            let a = t.row_normalize(a, 1e-12);
            let b = t.row_normalize(v[1], 1e-12);
            let parts = [t.row(b, 0), t.row(b, 1), t.row(b, 2), t.row(b, 3)];
            let b = t.stack_rows(&parts);
            let s = t.matmul_nt(a, b);
            t.info_nce(s, 0.3, true)
        });
    }

    #[test]
    fn masked_softmax_ignores_tail() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 100.0]]);
        let y = masked_softmax_rows(&x, 2);
        assert_eq!(y.get(0, 2), 0.0);
        assert!((y.get(0, 0) + y.get(0, 1) - 1.0).abs() < 1e-15);
    }
}
