//! A small reverse-mode differentiable array engine.
//!
//! A [`Graph`] records every operation as it runs. Nodes are appended in
//! evaluation order, so a reverse sweep over the node list is a valid
//! topological order for [`Graph::backward`]. Only the operations the
//! trajectory model needs are provided.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod tensor;

pub use adam::AdamState;
pub use tensor::Tensor;

use thiserror::Error;

use crate::kinematics::verlet_positions;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("{op}: {message}")]
    Invalid { op: &'static str, message: String },
}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    MatMul { a: Var, b: Var },
    CausalConv { x: Var, w: Var, b: Var, dilation: usize },
    Relu(Var),
    LeakyRelu { x: Var, slope: f64 },
    Tanh(Var),
    Exp(Var),
    Softmax { x: Var, axis: usize },
    Concat { xs: Vec<Var>, axis: usize },
    Slice { x: Var, axis: usize, start: usize },
    Select { x: Var, axis: usize, index: usize },
    Mean { x: Var, axis: usize },
    Reshape(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale { x: Var, factor: f64 },
    AddOuter { col: Var, row: Var },
    Sum(Var),
    Mse { pred: Var, target: Var },
    GaussianKl { mu: Var, log_var: Var },
    Verlet { accel: Var, prev: Var, last: Var, dt: f64 },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> DiffError {
    DiffError::Shape {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Add a leaf (parameter or constant input).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// `x W + b` for `x` of shape `[n, in]` (or `[in]`), `W` `[in, out]`,
    /// `b` `[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, DiffError> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if ws.len() != 2 || bs != [ws[1]] {
            return Err(shape_err("linear", ws, bs));
        }
        let (rows, inp) = match xs {
            [i] => (1, *i),
            [n, i] => (*n, *i),
            _ => return Err(shape_err("linear", xs, ws)),
        };
        if inp != ws[0] {
            return Err(shape_err("linear", xs, ws));
        }
        let out_dim = ws[1];
        let out_shape = if xs.len() == 1 {
            vec![out_dim]
        } else {
            vec![rows, out_dim]
        };
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = Vec::with_capacity(rows * out_dim);
        for r in 0..rows {
            out.extend_from_slice(bv);
            let row = &mut out[r * out_dim..];
            for k in 0..inp {
                let a = xv[r * inp + k];
                if a == 0.0 {
                    continue;
                }
                let wrow = &wv[k * out_dim..(k + 1) * out_dim];
                for (o, wk) in row.iter_mut().zip(wrow) {
                    *o += a * wk;
                }
            }
        }
        let value = Tensor::new(out_shape, out)?;
        self.push("linear", value, Op::Linear { x, w, b })
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        self.push("matmul", value, Op::MatMul { a, b })
    }

    /// Causal dilated convolution over time.
    ///
    /// `x`: `[batch, time, c_in]`, `w`: `[kernel, c_in, c_out]`, `b`: `[c_out]`.
    /// Tap `k` reads `x[t - (kernel - 1 - k) * dilation]`; reads before the
    /// start are zero, so output at `t` only sees inputs at times `<= t`.
    pub fn causal_conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Result<Var, DiffError> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 3 || ws.len() != 3 || ws[1] != xs[2] || bs != [ws[2]] {
            return Err(shape_err("causal_conv1d", xs, ws));
        }
        if dilation == 0 {
            return Err(DiffError::Invalid {
                op: "causal_conv1d",
                message: "dilation must be >= 1".into(),
            });
        }
        let (batch, time, cin) = (xs[0], xs[1], xs[2]);
        let (kernel, cout) = (ws[0], ws[2]);
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = vec![0.0; batch * time * cout];
        for bi in 0..batch {
            for t in 0..time {
                let o = &mut out[(bi * time + t) * cout..(bi * time + t + 1) * cout];
                o.copy_from_slice(bv);
                for k in 0..kernel {
                    let shift = (kernel - 1 - k) * dilation;
                    if shift > t {
                        continue;
                    }
                    let src = &xv[(bi * time + t - shift) * cin..(bi * time + t - shift + 1) * cin];
                    for (i, &xi) in src.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        let wrow = &wv[(k * cin + i) * cout..(k * cin + i + 1) * cout];
                        for (oo, wk) in o.iter_mut().zip(wrow) {
                            *oo += xi * wk;
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![batch, time, cout], out)?;
        self.push("causal_conv1d", value, Op::CausalConv { x, w, b, dilation })
    }

    fn map(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, DiffError> {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        self.push(name, value, op)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, DiffError> {
        self.map("relu", x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, DiffError> {
        self.map(
            "leaky_relu",
            x,
            |v| if v > 0.0 { v } else { slope * v },
            Op::LeakyRelu { x, slope },
        )
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, DiffError> {
        self.map("tanh", x, f64::tanh, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, DiffError> {
        self.map("exp", x, f64::exp, Op::Exp(x))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, DiffError> {
        self.map("scale", x, |v| v * factor, Op::Scale { x, factor })
    }

    fn check_axis(&self, op: &'static str, x: Var, axis: usize) -> Result<(), DiffError> {
        if axis >= self.shape(x).len() {
            return Err(DiffError::Invalid {
                op,
                message: format!("axis {axis} out of range for shape {:?}", self.shape(x)),
            });
        }
        Ok(())
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var, DiffError> {
        self.check_axis("softmax", x, axis)?;
        let src = self.value(x);
        let (outer, n, inner) = Tensor::axis_split(src.shape(), axis);
        let xv = src.data();
        let mut out = vec![0.0; xv.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * n + j) * inner + i;
                let max = (0..n).map(|j| xv[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..n {
                    let e = (xv[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
                for j in 0..n {
                    out[idx(j)] /= total;
                }
            }
        }
        let value = Tensor::new(src.shape().to_vec(), out)?;
        self.push("softmax", value, Op::Softmax { x, axis })
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var, DiffError> {
        let first = *xs.first().ok_or(DiffError::Invalid {
            op: "concat",
            message: "no inputs".into(),
        })?;
        self.check_axis("concat", first, axis)?;
        let base = self.shape(first).to_vec();
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = Tensor::axis_split(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let t = self.value(v);
                let n = t.shape()[axis];
                out.extend_from_slice(&t.data()[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, out)?;
        self.push(
            "concat",
            value,
            Op::Concat {
                xs: xs.to_vec(),
                axis,
            },
        )
    }

    /// Elements `start..start + len` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var, DiffError> {
        self.check_axis("slice", x, axis)?;
        let src = self.value(x);
        let (outer, n, inner) = Tensor::axis_split(src.shape(), axis);
        if start + len > n {
            return Err(DiffError::Invalid {
                op: "slice",
                message: format!("range {start}..{} exceeds axis length {n}", start + len),
            });
        }
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&src.data()[(o * n + start) * inner..(o * n + start + len) * inner]);
        }
        let mut shape = src.shape().to_vec();
        shape[axis] = len;
        let value = Tensor::new(shape, out)?;
        self.push("slice", value, Op::Slice { x, axis, start })
    }

    /// Pick one index along `axis`, dropping that axis.
    pub fn select(&mut self, x: Var, axis: usize, index: usize) -> Result<Var, DiffError> {
        self.check_axis("select", x, axis)?;
        let src = self.value(x);
        let (outer, n, inner) = Tensor::axis_split(src.shape(), axis);
        if index >= n {
            return Err(DiffError::Invalid {
                op: "select",
                message: format!("index {index} out of range {n}"),
            });
        }
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            out.extend_from_slice(&src.data()[(o * n + index) * inner..(o * n + index + 1) * inner]);
        }
        let mut shape = src.shape().to_vec();
        shape.remove(axis);
        let value = Tensor::new(shape, out)?;
        self.push("select", value, Op::Select { x, axis, index })
    }

    /// Mean along `axis`, dropping that axis.
    pub fn mean(&mut self, x: Var, axis: usize) -> Result<Var, DiffError> {
        self.check_axis("mean", x, axis)?;
        let src = self.value(x);
        let (outer, n, inner) = Tensor::axis_split(src.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..n {
                for i in 0..inner {
                    out[o * inner + i] += src.data()[(o * n + j) * inner + i];
                }
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        let mut shape = src.shape().to_vec();
        shape.remove(axis);
        let value = Tensor::new(shape, out)?;
        self.push("mean", value, Op::Mean { x, axis })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, DiffError> {
        let src = self.value(x);
        if shape.iter().product::<usize>() != src.numel() {
            return Err(shape_err("reshape", src.shape(), shape));
        }
        let value = src.clone().reshaped(shape.to_vec());
        self.push("reshape", value, Op::Reshape(x))
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, DiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(name, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `out[i, j] = col[i] + row[j]` for `col`, `row` of shape `[n, 1]` or `[n]`.
    pub fn add_outer(&mut self, col: Var, row: Var) -> Result<Var, DiffError> {
        let (c, r) = (self.value(col), self.value(row));
        let vec_like = |s: &[usize]| s.len() == 1 || (s.len() == 2 && s[1] == 1);
        if !vec_like(c.shape()) || !vec_like(r.shape()) {
            return Err(shape_err("add_outer", c.shape(), r.shape()));
        }
        let (n, m) = (c.numel(), r.numel());
        let mut out = Vec::with_capacity(n * m);
        for &ci in c.data() {
            out.extend(r.data().iter().map(|rj| ci + rj));
        }
        let value = Tensor::new(vec![n, m], out)?;
        self.push("add_outer", value, Op::AddOuter { col, row })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, DiffError> {
        let total = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(total), Op::Sum(x))
    }

    /// Mean squared error over every element.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, DiffError> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(shape_err("mse", p.shape(), t.shape()));
        }
        let n = p.numel().max(1) as f64;
        let total: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        self.push("mse", Tensor::scalar(total / n), Op::Mse { pred, target })
    }

    /// KL divergence of `N(mu, exp(log_var))` from the standard normal:
    /// `-0.5 Σ (1 + log_var - mu² - exp(log_var))` over the last axis,
    /// averaged over leading rows.
    pub fn gaussian_kl(&mut self, mu: Var, log_var: Var) -> Result<Var, DiffError> {
        let (m, lv) = (self.value(mu), self.value(log_var));
        if m.shape() != lv.shape() || m.shape().is_empty() {
            return Err(shape_err("gaussian_kl", m.shape(), lv.shape()));
        }
        if !lv.is_finite() {
            return Err(DiffError::NonFinite { op: "gaussian_kl" });
        }
        let rows = row_count(m.shape());
        let total: f64 = m
            .data()
            .iter()
            .zip(lv.data())
            .map(|(&u, &l)| -0.5 * (1.0 + l - u * u - l.exp()))
            .sum();
        self.push(
            "gaussian_kl",
            Tensor::scalar(total / rows as f64),
            Op::GaussianKl { mu, log_var },
        )
    }

    /// Verlet rollout. `accel`: `[n, steps * 3]`, `prev`/`last`: `[n, 3]`.
    /// Output has the shape of `accel` and holds the rolled-out positions.
    pub fn verlet(&mut self, accel: Var, prev: Var, last: Var, dt: f64) -> Result<Var, DiffError> {
        let (a, p, l) = (self.value(accel), self.value(prev), self.value(last));
        if a.shape().len() != 2 || a.shape()[1] % 3 != 0 {
            return Err(shape_err("verlet", a.shape(), &[0, 3]));
        }
        let n = a.shape()[0];
        if p.shape() != [n, 3] || l.shape() != [n, 3] {
            return Err(shape_err("verlet", p.shape(), l.shape()));
        }
        let steps = a.shape()[1] / 3;
        let mut out = Vec::with_capacity(n * steps * 3);
        for r in 0..n {
            let acc: Vec<[f64; 3]> = a.data()[r * steps * 3..(r + 1) * steps * 3]
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect();
            let pr = &p.data()[r * 3..r * 3 + 3];
            let la = &l.data()[r * 3..r * 3 + 3];
            for pos in verlet_positions([pr[0], pr[1], pr[2]], [la[0], la[1], la[2]], &acc, dt) {
                out.extend_from_slice(&pos);
            }
        }
        let value = Tensor::new(a.shape().to_vec(), out)?;
        self.push("verlet", value, Op::Verlet { accel, prev, last, dt })
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, DiffError> {
        if self.value(loss).numel() != 1 {
            return Err(DiffError::Invalid {
                op: "backward",
                message: format!("loss must be scalar, got shape {:?}", self.shape(loss)),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<(), DiffError> {
        let node = &self.nodes[idx];
        let gd = g.data();
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xt, wt) = (self.value(*x), self.value(*w));
                let (inp, out_dim) = (wt.shape()[0], wt.shape()[1]);
                let rows = xt.numel() / inp;
                let gx = matmul_raw_bt(gd, wt.data(), rows, out_dim, inp);
                let gw = matmul_raw_at(xt.data(), gd, rows, inp, out_dim);
                let mut gb = vec![0.0; out_dim];
                for r in 0..rows {
                    for (o, v) in gb.iter_mut().zip(&gd[r * out_dim..(r + 1) * out_dim]) {
                        *o += v;
                    }
                }
                acc(*x, Tensor::new(xt.shape().to_vec(), gx)?);
                acc(*w, Tensor::new(wt.shape().to_vec(), gw)?);
                acc(*b, Tensor::vector(gb));
            }
            Op::MatMul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let ga = matmul_raw_bt(gd, tb.data(), m, n, k);
                let gb = matmul_raw_at(ta.data(), gd, m, k, n);
                acc(*a, Tensor::new(vec![m, k], ga)?);
                acc(*b, Tensor::new(vec![k, n], gb)?);
            }
            Op::CausalConv { x, w, b, dilation } => {
                let (xt, wt) = (self.value(*x), self.value(*w));
                let (batch, time, cin) = (xt.shape()[0], xt.shape()[1], xt.shape()[2]);
                let (kernel, cout) = (wt.shape()[0], wt.shape()[2]);
                let (xv, wv) = (xt.data(), wt.data());
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                let mut gb = vec![0.0; cout];
                for bi in 0..batch {
                    for t in 0..time {
                        let go = &gd[(bi * time + t) * cout..(bi * time + t + 1) * cout];
                        for (o, v) in gb.iter_mut().zip(go) {
                            *o += v;
                        }
                        for k in 0..kernel {
                            let shift = (kernel - 1 - k) * dilation;
                            if shift > t {
                                continue;
                            }
                            let base = (bi * time + t - shift) * cin;
                            for i in 0..cin {
                                let wrow = &wv[(k * cin + i) * cout..(k * cin + i + 1) * cout];
                                let gwrow = &mut gw[(k * cin + i) * cout..(k * cin + i + 1) * cout];
                                let xi = xv[base + i];
                                let mut s = 0.0;
                                for o in 0..cout {
                                    s += wrow[o] * go[o];
                                    gwrow[o] += xi * go[o];
                                }
                                gx[base + i] += s;
                            }
                        }
                    }
                }
                acc(*x, Tensor::new(xt.shape().to_vec(), gx)?);
                acc(*w, Tensor::new(wt.shape().to_vec(), gw)?);
                acc(*b, Tensor::vector(gb));
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                let d = xv.iter().zip(gd).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
                acc(*x, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::LeakyRelu { x, slope } => {
                let xv = self.value(*x).data();
                let d = xv
                    .iter()
                    .zip(gd)
                    .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
                    .collect();
                acc(*x, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Tanh(x) => {
                let yv = node.value.data();
                let d = yv.iter().zip(gd).map(|(&y, &g)| g * (1.0 - y * y)).collect();
                acc(*x, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Exp(x) => {
                let yv = node.value.data();
                let d = yv.iter().zip(gd).map(|(&y, &g)| g * y).collect();
                acc(*x, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Scale { x, factor } => {
                let d = gd.iter().map(|&g| g * factor).collect();
                acc(*x, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Softmax { x, axis } => {
                let y = &node.value;
                let (outer, n, inner) = Tensor::axis_split(y.shape(), *axis);
                let yv = y.data();
                let mut d = vec![0.0; yv.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |j: usize| (o * n + j) * inner + i;
                        let dot: f64 = (0..n).map(|j| yv[idx(j)] * gd[idx(j)]).sum();
                        for j in 0..n {
                            d[idx(j)] = yv[idx(j)] * (gd[idx(j)] - dot);
                        }
                    }
                }
                acc(*x, Tensor::new(y.shape().to_vec(), d)?);
            }
            Op::Concat { xs, axis } => {
                let (outer, total, inner) = Tensor::axis_split(g.shape(), *axis);
                let mut offset = 0;
                for &v in xs {
                    let shape = self.shape(v).to_vec();
                    let n = shape[*axis];
                    let mut d = Vec::with_capacity(outer * n * inner);
                    for o in 0..outer {
                        let from = (o * total + offset) * inner;
                        d.extend_from_slice(&gd[from..from + n * inner]);
                    }
                    offset += n;
                    acc(v, Tensor::new(shape, d)?);
                }
            }
            Op::Slice { x, axis, start } => {
                let shape = self.shape(*x).to_vec();
                let (outer, n, inner) = Tensor::axis_split(&shape, *axis);
                let len = g.shape()[*axis];
                let mut d = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    d[dst..dst + len * inner].copy_from_slice(&gd[o * len * inner..(o + 1) * len * inner]);
                }
                acc(*x, Tensor::new(shape, d)?);
            }
            Op::Select { x, axis, index } => {
                let shape = self.shape(*x).to_vec();
                let (outer, n, inner) = Tensor::axis_split(&shape, *axis);
                let mut d = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    let dst = (o * n + index) * inner;
                    d[dst..dst + inner].copy_from_slice(&gd[o * inner..(o + 1) * inner]);
                }
                acc(*x, Tensor::new(shape, d)?);
            }
            Op::Mean { x, axis } => {
                let shape = self.shape(*x).to_vec();
                let (outer, n, inner) = Tensor::axis_split(&shape, *axis);
                let mut d = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for j in 0..n {
                        for i in 0..inner {
                            d[(o * n + j) * inner + i] = gd[o * inner + i] / n as f64;
                        }
                    }
                }
                acc(*x, Tensor::new(shape, d)?);
            }
            Op::Reshape(x) => {
                let shape = self.shape(*x).to_vec();
                acc(*x, g.clone().reshaped(shape));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let da = gd.iter().zip(bv).map(|(g, y)| g * y).collect();
                let db = gd.iter().zip(av).map(|(g, x)| g * x).collect();
                acc(*a, Tensor::new(g.shape().to_vec(), da)?);
                acc(*b, Tensor::new(g.shape().to_vec(), db)?);
            }
            Op::AddOuter { col, row } => {
                let (n, m) = (g.shape()[0], g.shape()[1]);
                let mut dc = vec![0.0; n];
                let mut dr = vec![0.0; m];
                for i in 0..n {
                    for j in 0..m {
                        dc[i] += gd[i * m + j];
                        dr[j] += gd[i * m + j];
                    }
                }
                let cs = self.shape(*col).to_vec();
                let rs = self.shape(*row).to_vec();
                acc(*col, Tensor::new(cs, dc)?);
                acc(*row, Tensor::new(rs, dr)?);
            }
            Op::Sum(x) => {
                let shape = self.shape(*x);
                acc(*x, Tensor::full(shape, gd[0]));
            }
            Op::Mse { pred, target } => {
                let (p, t) = (self.value(*pred), self.value(*target));
                let scale = 2.0 * gd[0] / p.numel().max(1) as f64;
                let dp: Vec<f64> = p.data().iter().zip(t.data()).map(|(a, b)| scale * (a - b)).collect();
                let dt = dp.iter().map(|v| -v).collect();
                acc(*pred, Tensor::new(p.shape().to_vec(), dp)?);
                acc(*target, Tensor::new(t.shape().to_vec(), dt)?);
            }
            Op::GaussianKl { mu, log_var } => {
                let (m, lv) = (self.value(*mu), self.value(*log_var));
                let scale = gd[0] / row_count(m.shape()) as f64;
                let dm = m.data().iter().map(|u| scale * u).collect();
                let dl = lv.data().iter().map(|l| scale * 0.5 * (l.exp() - 1.0)).collect();
                acc(*mu, Tensor::new(m.shape().to_vec(), dm)?);
                acc(*log_var, Tensor::new(lv.shape().to_vec(), dl)?);
            }
            Op::Verlet { accel, prev, last, dt } => {
                let shape = self.shape(*accel).to_vec();
                let (n, steps) = (shape[0], shape[1] / 3);
                let dt2 = dt * dt;
                let mut da = vec![0.0; n * steps * 3];
                let mut dp = vec![0.0; n * 3];
                let mut dl = vec![0.0; n * 3];
                for r in 0..n {
                    for c in 0..3 {
                        let go = |k: usize| gd[(r * steps + k) * 3 + c];
                        // a[j] reaches position k >= j with weight (k - j + 1) dt².
                        let (mut tail, mut weighted) = (0.0, 0.0);
                        for j in (0..steps).rev() {
                            tail += go(j);
                            weighted += tail;
                            da[(r * steps + j) * 3 + c] = dt2 * weighted;
                        }
                        for k in 0..steps {
                            let step = (k + 1) as f64;
                            dl[r * 3 + c] += (1.0 + step) * go(k);
                            dp[r * 3 + c] -= step * go(k);
                        }
                    }
                }
                acc(*accel, Tensor::new(shape, da)?);
                acc(*prev, Tensor::new(vec![n, 3], dp)?);
                acc(*last, Tensor::new(vec![n, 3], dl)?);
            }
        }
        Ok(())
    }
}

fn row_count(shape: &[usize]) -> usize {
    shape[..shape.len().saturating_sub(1)].iter().product::<usize>().max(1)
}

/// `[m, k] x [k, n]`.
fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `g [m, n] x b^T` where `b` is `[k, n]`: result `[m, k]`.
fn matmul_raw_bt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `a^T x g` where `a` is `[m, k]`, `g` is `[m, n]`: result `[k, n]`.
fn matmul_raw_at(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, gv) in out[p * n..(p + 1) * n].iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
