//! Reverse-mode automatic differentiation over dense 2-D matrices.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! walks it in reverse and returns the gradient of a scalar node with
//! respect to every recorded node.

use std::collections::HashMap;

use ndarray::{Array2, Axis};

use super::params::{ParamId, ParamStore};
use super::sparse::SparseOp;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sparse(Var, SparseOp<T>),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MulCol(Var, Var),
    DivScalar(Var, Var),
    Norm(Var),
    ColMean(Var),
    ColMax(Var, Vec<usize>),
    Bce(Var, Array2<T>),
    Rse(Var, Array2<T>),
}

struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub const BCE_CLAMP: f64 = 1e-7;
pub const RSE_EPS: f64 = 1e-8;

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf for a trainable parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Leaf, true);
        self.params.insert(id, v);
        v
    }

    /// Copies the value of `v` into a constant, cutting gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    /// `a + b` with the single row of `b` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::AddRow(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let value = self.value(a).mapv(|x| x * c);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.tanh());
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// Constant sparse operator applied from the left.
    pub fn sparse(&mut self, op: &SparseOp<T>, a: Var) -> Var {
        let value = op.apply(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::Sparse(a, op.clone()), rg)
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let value = self.value(a).select(Axis(0), rows);
        let rg = self.rg(a);
        self.push(value, Op::GatherRows(a, rows.to_vec()), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatRows(parts.to_vec()), rg)
    }

    /// Row `i` of `a` scaled by `s[i, 0]`.
    pub fn mul_col(&mut self, a: Var, s: Var) -> Var {
        let value = self.value(a) * self.value(s);
        let rg = self.rg(a) || self.rg(s);
        self.push(value, Op::MulCol(a, s), rg)
    }

    /// `a / s` for a 1x1 `s`.
    pub fn div_scalar(&mut self, a: Var, s: Var) -> Var {
        let d = self.scalar(s);
        let value = self.value(a).mapv(|x| x / d);
        let rg = self.rg(a) || self.rg(s);
        self.push(value, Op::DivScalar(a, s), rg)
    }

    /// Frobenius norm as a 1x1 matrix.
    pub fn norm(&mut self, a: Var) -> Var {
        let n = self.value(a).iter().map(|&x| x * x).sum::<T>().sqrt();
        let rg = self.rg(a);
        self.push(Array2::from_elem((1, 1), n), Op::Norm(a), rg)
    }

    pub fn col_mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let rows = T::from_usize(m.nrows()).expect("row count");
        let value = m.sum_axis(Axis(0)).mapv(|x| x / rows).insert_axis(Axis(0));
        let rg = self.rg(a);
        self.push(value, Op::ColMean(a), rg)
    }

    /// Column maxima; the first maximal row receives the gradient.
    pub fn col_max(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut arg = vec![0usize; m.ncols()];
        let mut best = Array2::from_elem((1, m.ncols()), T::neg_infinity());
        for (r, row) in m.rows().into_iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                if x > best[[0, c]] {
                    best[[0, c]] = x;
                    arg[c] = r;
                }
            }
        }
        let rg = self.rg(a);
        self.push(best, Op::ColMax(a, arg), rg)
    }

    /// Mean binary cross-entropy of probabilities `p` against 0/1 `labels`,
    /// with `p` clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce(&mut self, p: Var, labels: Array2<T>) -> Var {
        let value = bce_value(self.value(p), &labels);
        let rg = self.rg(p);
        self.push(Array2::from_elem((1, 1), value), Op::Bce(p, labels), rg)
    }

    /// Relative squared error `sum (y - q)^2 / (sum (q - mean q)^2 + 1e-8)`.
    pub fn rse(&mut self, y: Var, targets: Array2<T>) -> Var {
        let value = rse_value(self.value(y), &targets);
        let rg = self.rg(y);
        self.push(Array2::from_elem((1, 1), value), Op::Rse(y, targets), rg)
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones(self.value(loss).raw_dim()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            let mut acc = |v: Var, delta: Array2<T>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &delta,
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        acc(*a, g.dot(&self.value(*b).t()));
                    }
                    if self.rg(*b) {
                        acc(*b, self.value(*a).t().dot(&g));
                    }
                }
                Op::AddRow(a, b) => {
                    if self.rg(*b) {
                        acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    acc(*a, g);
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::Scale(a, c) => acc(*a, g.mapv(|x| x * *c)),
                Op::Relu(a) => {
                    let mut d = g;
                    d.zip_mut_with(self.value(*a), |x, &inp| {
                        if inp <= T::zero() {
                            *x = T::zero();
                        }
                    });
                    acc(*a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    d.zip_mut_with(&node.value, |x, &t| *x *= T::one() - t * t);
                    acc(*a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    d.zip_mut_with(&node.value, |x, &s| *x *= s * (T::one() - s));
                    acc(*a, d);
                }
                Op::Sparse(a, op) => acc(*a, op.apply_transpose(&g)),
                Op::GatherRows(a, rows) => {
                    let src = self.value(*a);
                    let mut d = Array2::zeros(src.raw_dim());
                    for (out_row, &r) in rows.iter().enumerate() {
                        let mut dst = d.row_mut(r);
                        dst += &g.row(out_row);
                    }
                    acc(*a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(p, g.slice(ndarray::s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).nrows();
                        acc(p, g.slice(ndarray::s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                Op::MulCol(a, s) => {
                    if self.rg(*s) {
                        let ds = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                        acc(*s, ds);
                    }
                    acc(*a, &g * self.value(*s));
                }
                Op::DivScalar(a, s) => {
                    let d = self.scalar(*s);
                    if self.rg(*s) {
                        // d(a/s)/ds = -a/s^2
                        let ds = (&g * self.value(*a)).sum() / (d * d);
                        acc(*s, Array2::from_elem((1, 1), -ds));
                    }
                    acc(*a, g.mapv(|x| x / d));
                }
                Op::Norm(a) => {
                    let n = node.value[[0, 0]];
                    let scale = g[[0, 0]] / n;
                    acc(*a, self.value(*a).mapv(|x| x * scale));
                }
                Op::ColMean(a) => {
                    let src = self.value(*a);
                    let rows = T::from_usize(src.nrows()).expect("row count");
                    let row = g.mapv(|x| x / rows);
                    let d = Array2::from_shape_fn(src.raw_dim(), |(_, c)| row[[0, c]]);
                    acc(*a, d);
                }
                Op::ColMax(a, arg) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    for (c, &r) in arg.iter().enumerate() {
                        d[[r, c]] = g[[0, c]];
                    }
                    acc(*a, d);
                }
                Op::Bce(p, labels) => {
                    let lo = T::lit(BCE_CLAMP);
                    let hi = T::one() - lo;
                    let count = T::from_usize(labels.len()).expect("label count");
                    let scale = g[[0, 0]] / count;
                    let mut d = self.value(*p).clone();
                    d.zip_mut_with(labels, |x, &c| {
                        *x = if *x < lo || *x > hi {
                            T::zero()
                        } else {
                            scale * (*x - c) / (*x * (T::one() - *x))
                        };
                    });
                    acc(*p, d);
                }
                Op::Rse(y, q) => {
                    let den = rse_denominator(q);
                    let scale = g[[0, 0]] * T::lit(2.0) / den;
                    let d = (self.value(*y) - q).mapv(|x| x * scale);
                    acc(*y, d);
                }
            }
        }
        Gradients {
            grads,
            params: self.params.clone(),
        }
    }
}

pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Scalar> Gradients<T> {
    pub fn of(&self, v: Var) -> Option<&Array2<T>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of a parameter, `None` if it was not used or got no signal.
    pub fn param(&self, id: ParamId) -> Option<&Array2<T>> {
        self.params.get(&id).and_then(|v| self.of(*v))
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub(crate) fn bce_value<T: Scalar>(p: &Array2<T>, labels: &Array2<T>) -> T {
    let lo = T::lit(BCE_CLAMP);
    let hi = T::one() - lo;
    let total: T = p
        .iter()
        .zip(labels.iter())
        .map(|(&p, &c)| {
            let p = p.max(lo).min(hi);
            -(c * p.ln() + (T::one() - c) * (T::one() - p).ln())
        })
        .sum();
    total / T::from_usize(p.len()).expect("count")
}

fn rse_denominator<T: Scalar>(q: &Array2<T>) -> T {
    let n = T::from_usize(q.len()).expect("count");
    let mean = q.iter().copied().sum::<T>() / n;
    q.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() + T::lit(RSE_EPS)
}

pub(crate) fn rse_value<T: Scalar>(y: &Array2<T>, q: &Array2<T>) -> T {
    let num: T = y.iter().zip(q.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    num / rse_denominator(q)
}
