//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every operation appends a node holding its value; `backward` walks the
//! tape in reverse. Parameters are borrowed from a [`ParamStore`] so building
//! a graph never copies weights.
//!
//! Shape mismatches inside a graph are programming errors and panic; model
//! entry points validate user-facing dimensions before building a graph.

use std::borrow::Cow;

use super::params::ParamStore;
use super::tensor::{gemm, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a + b` with `b` repeated down the rows of `a`.
    AddTiled(Var, Var),
    MulTiled(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Tanh(Var),
    Gelu(Var),
    Exp(Var),
    Minimum(Var, Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        seq: usize,
        probs: Vec<f64>,
    },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
}

/// Which keys each query may attend to inside one sequence block.
#[derive(Clone, Debug, Default)]
pub struct AttentionMask {
    /// Query `i` only sees keys `j ≤ i`.
    pub causal: bool,
    /// Per-row key validity over the whole batch; `None` means all valid.
    pub key_valid: Option<Vec<bool>>,
}

pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    store: Option<&'a ParamStore>,
    param_vars: Vec<Option<Var>>,
}

/// Gradients of one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<Option<Var>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient per parameter of `store`, zeros for unused ones.
    pub fn params(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .tensors()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                self.params
                    .get(i)
                    .copied()
                    .flatten()
                    .and_then(|v| self.grads[v.0].clone())
                    .unwrap_or_else(|| Tensor::zeros(t.rows, t.cols))
            })
            .collect()
    }
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Graph {
            nodes: Vec::new(),
            store: None,
            param_vars: Vec::new(),
        }
    }
}

fn same_shape(a: &Tensor, b: &Tensor, op: &str) {
    assert_eq!(a.shape(), b.shape(), "{op}: shape mismatch");
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn with_params(store: &'a ParamStore) -> Self {
        Graph {
            nodes: Vec::new(),
            store: Some(store),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Parameter `id` of the attached store; repeated calls share one node.
    pub fn param(&mut self, id: usize) -> Var {
        if let Some(v) = self.param_vars[id] {
            return v;
        }
        let store = self.store.expect("graph built without a parameter store");
        self.nodes.push(Node {
            value: Cow::Borrowed(store.get(id)),
            op: Op::Param,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id] = Some(v);
        v
    }

    fn zip(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(x, y, name);
        let data = x.data.iter().zip(&y.data).map(|(p, q)| f(*p, *q)).collect();
        let t = Tensor {
            rows: x.rows,
            cols: x.cols,
            data,
        };
        self.push(t, op)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a).map(f);
        self.push(t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, "add", |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, "sub", |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, "mul", |p, q| p * q, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, "minimum", f64::min, Op::Minimum(a, b))
    }

    fn tiled(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.cols, y.cols, "tiled op: column mismatch");
        assert!(y.rows > 0 && x.rows % y.rows == 0, "tiled op: rows do not tile");
        let period = y.data.len();
        let data = x.data.iter().enumerate().map(|(i, p)| f(*p, y.data[i % period])).collect();
        let t = Tensor {
            rows: x.rows,
            cols: x.cols,
            data,
        };
        self.push(t, op)
    }

    /// `a + b` with `b` (r×c) repeated over the rows of `a` (n·r×c).
    pub fn add_tiled(&mut self, a: Var, b: Var) -> Var {
        self.tiled(a, b, |p, q| p + q, Op::AddTiled(a, b))
    }

    pub fn mul_tiled(&mut self, a: Var, b: Var) -> Var {
        self.tiled(a, b, |p, q| p * q, Op::MulTiled(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.unary(a, |v| v * s, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        self.unary(a, |v| v + s, Op::AddScalar(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let mut out = Tensor::zeros(x.rows, y.cols);
        gemm(x, false, y, false, &mut out, false);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(
            a,
            |x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
            Op::Gelu(a),
        )
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// Elementwise clamp; the gradient is zero outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |v| v.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = x.data.iter().sum::<f64>() / x.data.len().max(1) as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Row sums, n×c → n×1.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = (0..x.rows).map(|r| x.row(r).iter().sum()).collect();
        let t = Tensor {
            rows: x.rows,
            cols: 1,
            data,
        };
        self.push(t, Op::SumCols(a))
    }

    /// Rows `index[i]` of `a`, in order; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, index: Vec<usize>) -> Var {
        let x = self.value(a);
        let mut data = Vec::with_capacity(index.len() * x.cols);
        for &r in &index {
            assert!(r < x.rows, "gather_rows: row {r} out of {}", x.rows);
            data.extend_from_slice(x.row(r));
        }
        let t = Tensor {
            rows: index.len(),
            cols: x.cols,
            data,
        };
        self.push(t, Op::GatherRows(a, index))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.cols, "slice_cols out of range");
        let mut data = Vec::with_capacity(x.rows * len);
        for r in 0..x.rows {
            data.extend_from_slice(&x.row(r)[start..start + len]);
        }
        let t = Tensor {
            rows: x.rows,
            cols: len,
            data,
        };
        self.push(t, Op::SliceCols(a, start))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let x = self.value(p);
            assert_eq!(x.cols, cols, "concat_rows: column mismatch");
            data.extend_from_slice(&x.data);
            rows += x.rows;
        }
        self.push(Tensor { rows, cols, data }, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let x = self.value(p);
            assert_eq!(x.rows, rows, "concat_cols: row mismatch");
            for r in 0..rows {
                out.row_mut(r)[off..off + x.cols].copy_from_slice(x.row(r));
            }
            off += x.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Normalizes each row, then applies the 1×c `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (xv, g, b) = (self.value(x), self.value(gamma), self.value(beta));
        let c = xv.cols;
        assert_eq!(g.shape(), (1, c), "layer_norm gamma shape");
        assert_eq!(b.shape(), (1, c), "layer_norm beta shape");
        let mut out = Tensor::zeros(xv.rows, c);
        let mut xhat = vec![0.0; xv.data.len()];
        let mut inv_std = vec![0.0; xv.rows];
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = inv;
            for j in 0..c {
                let h = (row[j] - mean) * inv;
                xhat[r * c + j] = h;
                out.data[r * c + j] = h * g.data[j] + b.data[j];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Multi-head scaled dot-product attention over blocks of `seq` rows.
    ///
    /// `q`, `k`, `v` are (batch·seq)×d with `d` divisible by `heads`. A query
    /// with no visible key produces a zero row.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, seq: usize, mask: &AttentionMask) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        same_shape(qv, kv, "attention q/k");
        same_shape(qv, vv, "attention q/v");
        let (n, d) = qv.shape();
        assert!(seq > 0 && n % seq == 0, "attention: rows not a multiple of seq");
        assert!(heads > 0 && d % heads == 0, "attention: width not divisible by heads");
        if let Some(kvld) = &mask.key_valid {
            assert_eq!(kvld.len(), n, "attention key mask length");
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let batch = n / seq;
        let mut probs = vec![0.0; batch * heads * seq * seq];
        let mut out = Tensor::zeros(n, d);
        let mut scores = vec![0.0; seq];
        for b in 0..batch {
            for h in 0..heads {
                let c0 = h * dh;
                for i in 0..seq {
                    let qi = &qv.row(b * seq + i)[c0..c0 + dh];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..seq {
                        let visible = (!mask.causal || j <= i)
                            && mask.key_valid.as_ref().is_none_or(|m| m[b * seq + j]);
                        scores[j] = if visible {
                            let kj = &kv.row(b * seq + j)[c0..c0 + dh];
                            let s = qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() * scale;
                            max = max.max(s);
                            s
                        } else {
                            f64::NEG_INFINITY
                        };
                    }
                    if max == f64::NEG_INFINITY {
                        continue;
                    }
                    let p = &mut probs[((b * heads + h) * seq + i) * seq..][..seq];
                    let mut z = 0.0;
                    for j in 0..seq {
                        p[j] = if scores[j] == f64::NEG_INFINITY {
                            0.0
                        } else {
                            (scores[j] - max).exp()
                        };
                        z += p[j];
                    }
                    let orow = &mut out.data[(b * seq + i) * d + c0..][..dh];
                    for j in 0..seq {
                        p[j] /= z;
                        if p[j] != 0.0 {
                            let vj = &vv.row(b * seq + j)[c0..c0 + dh];
                            for (o, x) in orow.iter_mut().zip(vj) {
                                *o += p[j] * x;
                            }
                        }
                    }
                }
            }
        }
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                seq,
                probs,
            },
        )
    }

    /// Mean squared error between equal-shape tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let sq = self.square(d);
        self.mean(sq)
    }

    /// Reverse pass from a 1×1 `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            self.propagate(i, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        Gradients {
            grads,
            params: self.param_vars.clone(),
        }
    }

    fn propagate(&self, i: usize, gy: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |v: Var| -> &Tensor { &self.nodes[v.0].value };
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut Tensor)| {
            let t = grads[v.0].get_or_insert_with(|| {
                let x = &self.nodes[v.0].value;
                Tensor::zeros(x.rows, x.cols)
            });
            f(t);
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::Add(a, b) => {
                acc(*a, &mut |g| g.axpy(1.0, gy));
                acc(*b, &mut |g| g.axpy(1.0, gy));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |g| g.axpy(1.0, gy));
                acc(*b, &mut |g| g.axpy(-1.0, gy));
            }
            Op::Mul(a, b) => {
                let (x, z) = (val(*a), val(*b));
                acc(*a, &mut |g| {
                    for ((g, d), w) in g.data.iter_mut().zip(&gy.data).zip(&z.data) {
                        *g += d * w;
                    }
                });
                acc(*b, &mut |g| {
                    for ((g, d), w) in g.data.iter_mut().zip(&gy.data).zip(&x.data) {
                        *g += d * w;
                    }
                });
            }
            Op::AddTiled(a, b) => {
                acc(*a, &mut |g| g.axpy(1.0, gy));
                acc(*b, &mut |g| {
                    let period = g.data.len();
                    for (j, d) in gy.data.iter().enumerate() {
                        g.data[j % period] += d;
                    }
                });
            }
            Op::MulTiled(a, b) => {
                let (x, z) = (val(*a), val(*b));
                let period = z.data.len();
                acc(*a, &mut |g| {
                    for (j, (g, d)) in g.data.iter_mut().zip(&gy.data).enumerate() {
                        *g += d * z.data[j % period];
                    }
                });
                acc(*b, &mut |g| {
                    for (j, d) in gy.data.iter().enumerate() {
                        g.data[j % period] += d * x.data[j];
                    }
                });
            }
            Op::Scale(a, s) => acc(*a, &mut |g| g.axpy(*s, gy)),
            Op::AddScalar(a) => acc(*a, &mut |g| g.axpy(1.0, gy)),
            Op::MatMul(a, b) => {
                let (x, z) = (val(*a), val(*b));
                acc(*a, &mut |g| gemm(gy, false, z, true, g, true));
                acc(*b, &mut |g| gemm(x, true, gy, false, g, true));
            }
            Op::Tanh(a) => acc(*a, &mut |g| {
                for ((g, d), t) in g.data.iter_mut().zip(&gy.data).zip(&y.data) {
                    *g += d * (1.0 - t * t);
                }
            }),
            Op::Gelu(a) => {
                let x = val(*a);
                acc(*a, &mut |g| {
                    for ((g, d), x) in g.data.iter_mut().zip(&gy.data).zip(&x.data) {
                        let u = GELU_C * (x + 0.044715 * x * x * x);
                        let t = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                        *g += d * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
                    }
                })
            }
            Op::Exp(a) => acc(*a, &mut |g| {
                for ((g, d), e) in g.data.iter_mut().zip(&gy.data).zip(&y.data) {
                    *g += d * e;
                }
            }),
            Op::Minimum(a, b) => {
                let (x, z) = (val(*a), val(*b));
                acc(*a, &mut |g| {
                    for j in 0..g.data.len() {
                        if x.data[j] <= z.data[j] {
                            g.data[j] += gy.data[j];
                        }
                    }
                });
                acc(*b, &mut |g| {
                    for j in 0..g.data.len() {
                        if x.data[j] > z.data[j] {
                            g.data[j] += gy.data[j];
                        }
                    }
                });
            }
            Op::Clamp(a, lo, hi) => {
                let x = val(*a);
                acc(*a, &mut |g| {
                    for j in 0..g.data.len() {
                        if x.data[j] >= *lo && x.data[j] <= *hi {
                            g.data[j] += gy.data[j];
                        }
                    }
                })
            }
            Op::Sum(a) => {
                let d = gy.item();
                acc(*a, &mut |g| g.data.iter_mut().for_each(|v| *v += d));
            }
            Op::Mean(a) => {
                let n = val(*a).data.len().max(1) as f64;
                let d = gy.item() / n;
                acc(*a, &mut |g| g.data.iter_mut().for_each(|v| *v += d));
            }
            Op::SumCols(a) => acc(*a, &mut |g| {
                let c = g.cols;
                for (j, v) in g.data.iter_mut().enumerate() {
                    *v += gy.data[j / c];
                }
            }),
            Op::GatherRows(a, index) => acc(*a, &mut |g| {
                let c = g.cols;
                for (k, &r) in index.iter().enumerate() {
                    for (v, d) in g.data[r * c..(r + 1) * c].iter_mut().zip(gy.row(k)) {
                        *v += d;
                    }
                }
            }),
            Op::SliceCols(a, start) => acc(*a, &mut |g| {
                let c = g.cols;
                for r in 0..gy.rows {
                    for (v, d) in g.data[r * c + start..].iter_mut().zip(gy.row(r)) {
                        *v += d;
                    }
                }
            }),
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = val(p).data.len();
                    acc(p, &mut |g| {
                        for (v, d) in g.data.iter_mut().zip(&gy.data[off..off + n]) {
                            *v += d;
                        }
                    });
                    off += n;
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = val(p).cols;
                    acc(p, &mut |g| {
                        for r in 0..gy.rows {
                            for (v, d) in g.row_mut(r).iter_mut().zip(&gy.row(r)[off..off + w]) {
                                *v += d;
                            }
                        }
                    });
                    off += w;
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gv = val(*gamma);
                let c = gv.cols;
                let rows = gy.rows;
                acc(*gamma, &mut |g| {
                    for r in 0..rows {
                        for j in 0..c {
                            g.data[j] += gy.data[r * c + j] * xhat[r * c + j];
                        }
                    }
                });
                acc(*beta, &mut |g| {
                    for r in 0..rows {
                        for j in 0..c {
                            g.data[j] += gy.data[r * c + j];
                        }
                    }
                });
                acc(*x, &mut |g| {
                    let mut dh = vec![0.0; c];
                    for r in 0..rows {
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..c {
                            dh[j] = gy.data[r * c + j] * gv.data[j];
                            m1 += dh[j];
                            m2 += dh[j] * xhat[r * c + j];
                        }
                        m1 /= c as f64;
                        m2 /= c as f64;
                        for j in 0..c {
                            g.data[r * c + j] += inv_std[r] * (dh[j] - m1 - xhat[r * c + j] * m2);
                        }
                    }
                });
            }
            Op::Attention {
                q,
                k,
                v,
                heads,
                seq,
                probs,
            } => {
                let (qv, kv, vv) = (val(*q), val(*k), val(*v));
                let (n, d) = qv.shape();
                let (heads, seq) = (*heads, *seq);
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let mut dq = Tensor::zeros(n, d);
                let mut dk = Tensor::zeros(n, d);
                let mut dv = Tensor::zeros(n, d);
                let mut dp = vec![0.0; seq];
                for b in 0..n / seq {
                    for h in 0..heads {
                        let c0 = h * dh;
                        for i in 0..seq {
                            let p = &probs[((b * heads + h) * seq + i) * seq..][..seq];
                            let go = &gy.row(b * seq + i)[c0..c0 + dh];
                            let mut dot = 0.0;
                            for j in 0..seq {
                                if p[j] == 0.0 {
                                    dp[j] = 0.0;
                                    continue;
                                }
                                let vj = &vv.row(b * seq + j)[c0..c0 + dh];
                                dp[j] = go.iter().zip(vj).map(|(x, y)| x * y).sum();
                                dot += p[j] * dp[j];
                                let dvj = &mut dv.data[(b * seq + j) * d + c0..][..dh];
                                for (t, x) in dvj.iter_mut().zip(go) {
                                    *t += p[j] * x;
                                }
                            }
                            for j in 0..seq {
                                if p[j] == 0.0 {
                                    continue;
                                }
                                let ds = p[j] * (dp[j] - dot) * scale;
                                let qi = &qv.row(b * seq + i)[c0..c0 + dh];
                                let kj = &kv.row(b * seq + j)[c0..c0 + dh];
                                let dqi = &mut dq.data[(b * seq + i) * d + c0..][..dh];
                                for (t, x) in dqi.iter_mut().zip(kj) {
                                    *t += ds * x;
                                }
                                let dkj = &mut dk.data[(b * seq + j) * d + c0..][..dh];
                                for (t, x) in dkj.iter_mut().zip(qi) {
                                    *t += ds * x;
                                }
                            }
                        }
                    }
                }
                acc(*q, &mut |g| g.axpy(1.0, &dq));
                acc(*k, &mut |g| g.axpy(1.0, &dk));
                acc(*v, &mut |g| g.axpy(1.0, &dv));
            }
        }
    }
}

/// Largest relative error between backprop and central differences.
///
/// `f` builds a scalar from the given inputs. Each error is
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-3)` so vanishing
/// gradients are compared absolutely.
pub fn grad_check(inputs: &[Tensor], h: f64, f: impl Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.input(x.clone())).collect();
        let out = f(&mut g, &vars);
        g.value(out).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out);
    let mut worst: f64 = 0.0;
    let mut xs = inputs.to_vec();
    for (t, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[t].rows, inputs[t].cols));
        for j in 0..inputs[t].data.len() {
            let x0 = xs[t].data[j];
            xs[t].data[j] = x0 + h;
            let up = eval(&xs);
            xs[t].data[j] = x0 - h;
            let down = eval(&xs);
            xs[t].data[j] = x0;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic.data[j], numeric));
        }
    }
    worst
}

pub(crate) fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// [`grad_check`] over the entries of a parameter store.
///
/// `entries` limits how many entries per tensor are probed (evenly spaced);
/// `None` probes every entry.
pub fn grad_check_params(
    store: &ParamStore,
    h: f64,
    entries: Option<usize>,
    f: impl Fn(&mut Graph) -> Var,
) -> f64 {
    let grads = {
        let mut g = Graph::with_params(store);
        let out = f(&mut g);
        g.backward(out).params(store)
    };
    let eval = |s: &ParamStore| {
        let mut g = Graph::with_params(s);
        let out = f(&mut g);
        g.value(out).item()
    };
    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for t in 0..store.len() {
        let n = store.get(t).data.len();
        let picks: Vec<usize> = match entries {
            Some(m) if m < n => (0..m).map(|i| i * n / m).collect(),
            _ => (0..n).collect(),
        };
        for j in picks {
            let x0 = store.get(t).data[j];
            probe.get_mut(t).data[j] = x0 + h;
            let up = eval(&probe);
            probe.get_mut(t).data[j] = x0 - h;
            let down = eval(&probe);
            probe.get_mut(t).data[j] = x0;
            worst = worst.max(relative_error(grads[t].data[j], (up - down) / (2.0 * h)));
        }
    }
    worst
}
