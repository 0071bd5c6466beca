//! Reverse-mode differentiation over a linear tape.
//!
//! Forward ops append a node holding the computed value and the indices of
//! its inputs. `backward` walks the tape in reverse, accumulating adjoints,
//! and adds parameter adjoints into the owning [`ParamStore`].

use std::rc::Rc;

use super::param::{ParamId, ParamStore};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Relu,
    Tanh,
    Sigmoid,
    Add,
    Mul,
    Concat,
    Mean,
    L2Norm,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Concat(Vec<usize>),
    Mean(Vec<usize>),
    Sum(usize),
    L2Norm { src: usize, norm: f64 },
    Reshape(usize),
    Slice { src: usize, start: usize },
    SoftmaxCe { logits: usize, target: usize, probs: Vec<f64> },
    EdgeConv(Box<EdgeConvNode>),
}

#[derive(Debug, Clone)]
struct EdgeConvNode {
    w: usize,
    fb: usize,
    b: usize,
    x: usize,
    plan: Rc<EdgeConvPlan>,
    /// Per distinct attribute, the `d_out × d_in` filter, row-major.
    thetas: Vec<f64>,
}

/// Message structure of an edge-conditioned convolution: node `target`
/// averages `theta(attrs[attr]) · x[source]` over its incoming messages.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConvPlan {
    nodes: usize,
    edge_dim: usize,
    attrs: Vec<f64>,
    messages: Vec<(usize, usize, usize)>,
    inv_degree: Vec<f64>,
}

impl EdgeConvPlan {
    /// `messages` are `(target, source, attr)`; every node needs at least
    /// one incoming message.
    pub fn new(nodes: usize, attrs: &[Vec<f64>], messages: Vec<(usize, usize, usize)>) -> Result<Self> {
        let edge_dim = attrs.first().map_or(0, Vec::len);
        if attrs.iter().any(|a| a.len() != edge_dim) {
            return Err(Error::Contract("edge attributes differ in length".into()));
        }
        let mut degree = vec![0usize; nodes];
        for &(t, s, a) in &messages {
            if t >= nodes || s >= nodes || a >= attrs.len() {
                return Err(Error::Contract(format!("message ({t}, {s}, {a}) out of range")));
            }
            degree[t] += 1;
        }
        if let Some(i) = degree.iter().position(|&d| d == 0) {
            return Err(Error::Contract(format!("node {i} receives no message")));
        }
        Ok(EdgeConvPlan {
            nodes,
            edge_dim,
            attrs: attrs.concat(),
            messages,
            inv_degree: degree.iter().map(|&d| 1.0 / d as f64).collect(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    fn attr(&self, a: usize) -> &[f64] {
        &self.attrs[a * self.edge_dim..(a + 1) * self.edge_dim]
    }

    fn attr_count(&self) -> usize {
        self.attrs.len().checked_div(self.edge_dim).unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Adjoints produced by [`Tape::backward`], indexed by tape variable.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Adjoint of `var`; `None` when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    warnings: Vec<String>,
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

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.len() != tb.len() || ta.dims2() != tb.dims2() {
            return Err(Error::Dimension {
                op,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2();
        let (k2, n) = self.value(b).dims2();
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: self.value(a).shape().to_vec(),
                rhs: self.value(b).shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::MatMul(a.0, b.0)))
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(op, a, b)?;
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let src = self.value(a);
        let data = src.data().iter().map(|x| x * factor).collect();
        let t = Tensor::new(src.shape().to_vec(), data).expect("shape preserved");
        self.push(t, Op::Scale(a.0, factor))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let src = self.value(a);
        let data = src.data().iter().map(|&x| f(x)).collect();
        Tensor::new(src.shape().to_vec(), data).expect("shape preserved")
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.unary(a, |x| x.max(0.0));
        self.push(t, Op::Relu(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.unary(a, f64::tanh);
        self.push(t, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.unary(a, sigmoid);
        self.push(t, Op::Sigmoid(a.0))
    }

    /// Flattens and concatenates the inputs into one column vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Dimension {
                op: "concat",
                lhs: vec![],
                rhs: vec![],
            });
        }
        let total: usize = parts.iter().map(|&p| self.value(p).len()).sum();
        let mut data = Vec::with_capacity(total);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let t = Tensor::column(data);
        Ok(self.push(t, Op::Concat(parts.iter().map(|p| p.0).collect())))
    }

    /// Elementwise mean of equally shaped tensors.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Dimension {
            op: "mean",
            lhs: vec![],
            rhs: vec![],
        })?;
        for &p in &parts[1..] {
            self.same_shape("mean", first, p)?;
        }
        let n = parts.len() as f64;
        let mut data = vec![0.0; self.value(first).len()];
        for &p in parts {
            for (d, v) in data.iter_mut().zip(self.value(p).data()) {
                *d += v;
            }
        }
        data.iter_mut().for_each(|d| *d /= n);
        let t = Tensor::new(self.value(first).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Mean(parts.iter().map(|p| p.0).collect())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a.0))
    }

    /// Scales to unit Euclidean norm. The zero vector maps to itself and
    /// records a warning on the tape.
    pub fn l2norm(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let norm = src.norm();
        let t = if norm > 0.0 {
            let data = src.data().iter().map(|x| x / norm).collect();
            Tensor::new(src.shape().to_vec(), data).expect("shape preserved")
        } else {
            let t = Tensor::zeros(src.shape());
            log::warn!("l2norm of a zero vector; returning zeros");
            self.warnings.push("l2norm of zero vector".to_string());
            t
        };
        self.push(t, Op::L2Norm { src: a.0, norm })
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(a.0)))
    }

    /// Contiguous range of the flattened input, as a column vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let src = self.value(a);
        if start + len > src.len() {
            return Err(Error::Index {
                what: "slice",
                index: start + len,
                len: src.len(),
            });
        }
        let t = Tensor::column(src.data()[start..start + len].to_vec());
        Ok(self.push(t, Op::Slice { src: a.0, start }))
    }

    /// `-log softmax(logits)[target]`, computed with max-shifting.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let z = self.value(logits).data();
        if target >= z.len() {
            return Err(Error::Index {
                what: "class",
                index: target,
                len: z.len(),
            });
        }
        let probs = softmax(z);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits: logits.0,
                target,
                probs,
            },
        ))
    }

    /// Edge-conditioned convolution. `x` is `nodes × d_in`, `w` is
    /// `(d_out·d_in) × edge_dim`, `fb` is `(d_out·d_in) × 1` and `b` is
    /// `d_out × 1`; row `i` of the `nodes × d_out` result is
    /// `mean_m reshape(w·e_m + fb) · x[source_m] + b` over messages into `i`.
    pub fn edge_conv(&mut self, w: Var, fb: Var, b: Var, x: Var, plan: Rc<EdgeConvPlan>) -> Result<Var> {
        let (n, d_in) = self.value(x).dims2();
        let d_out = self.value(b).len();
        let (wr, wc) = self.value(w).dims2();
        let dim_err = |what: &'static str, lhs: Vec<usize>, rhs: &[usize]| Error::Dimension {
            op: what,
            lhs,
            rhs: rhs.to_vec(),
        };
        if n != plan.nodes {
            return Err(dim_err("edge_conv nodes", vec![plan.nodes, d_in], self.value(x).shape()));
        }
        if wr != d_out * d_in || wc != plan.edge_dim {
            return Err(dim_err("edge_conv filter", vec![d_out * d_in, plan.edge_dim], self.value(w).shape()));
        }
        if self.value(fb).len() != d_out * d_in {
            return Err(dim_err("edge_conv filter bias", vec![d_out * d_in, 1], self.value(fb).shape()));
        }
        let size = d_out * d_in;
        let mut thetas = vec![0.0; plan.attr_count() * size];
        for a in 0..plan.attr_count() {
            let theta = &mut thetas[a * size..(a + 1) * size];
            theta.copy_from_slice(self.value(fb).data());
            gemm_nn(self.value(w).data(), plan.attr(a), theta, size, plan.edge_dim, 1);
        }
        let xd = self.value(x).data();
        let mut out = vec![0.0; n * d_out];
        for &(t, s, a) in &plan.messages {
            let theta = &thetas[a * size..(a + 1) * size];
            let xs = &xd[s * d_in..(s + 1) * d_in];
            let scale = plan.inv_degree[t];
            for k in 0..d_out {
                let dot: f64 = theta[k * d_in..(k + 1) * d_in].iter().zip(xs).map(|(p, q)| p * q).sum();
                out[t * d_out + k] += scale * dot;
            }
        }
        let bd = self.value(b).data();
        for row in out.chunks_mut(d_out) {
            row.iter_mut().zip(bd).for_each(|(o, bv)| *o += bv);
        }
        let t = Tensor::new(vec![n, d_out], out)?;
        Ok(self.push(
            t,
            Op::EdgeConv(Box::new(EdgeConvNode {
                w: w.0,
                fb: fb.0,
                b: b.0,
                x: x.0,
                plan,
                thetas,
            })),
        ))
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() != n {
                return Err(Error::Contract(format!(
                    "{op:?} takes {n} inputs, got {}",
                    inputs.len()
                )));
            }
            Ok(())
        };
        match op {
            ElementwiseOp::Relu => arity(1).map(|_| self.relu(inputs[0])),
            ElementwiseOp::Tanh => arity(1).map(|_| self.tanh(inputs[0])),
            ElementwiseOp::Sigmoid => arity(1).map(|_| self.sigmoid(inputs[0])),
            ElementwiseOp::L2Norm => arity(1).map(|_| self.l2norm(inputs[0])),
            ElementwiseOp::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            ElementwiseOp::Mul => {
                arity(2)?;
                self.mul(inputs[0], inputs[1])
            }
            ElementwiseOp::Concat => self.concat(inputs),
            ElementwiseOp::Mean => self.mean(inputs),
        }
    }

    /// Computes d`loss`/d(every node) and adds parameter adjoints into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut Vec<f64> {
            grads[idx].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    for (dst, v) in p.grad.data_mut().iter_mut().zip(&g) {
                        *dst += v;
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k) = ta.dims2();
                    let (_, n) = tb.dims2();
                    gemm_nt(&g, tb.data(), acc(&mut grads, *a, m * k), m, k, n);
                    gemm_tn(ta.data(), &g, acc(&mut grads, *b, k * n), m, k, n);
                }
                Op::Add(a, b) => {
                    for &src in [a, b] {
                        let dst = acc(&mut grads, src, g.len());
                        dst.iter_mut().zip(&g).for_each(|(d, v)| *d += v);
                    }
                }
                Op::Sub(a, b) => {
                    let dst = acc(&mut grads, *a, g.len());
                    dst.iter_mut().zip(&g).for_each(|(d, v)| *d += v);
                    let dst = acc(&mut grads, *b, g.len());
                    dst.iter_mut().zip(&g).for_each(|(d, v)| *d -= v);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                    let da: Vec<f64> = g.iter().zip(vb).map(|(x, y)| x * y).collect();
                    let db: Vec<f64> = g.iter().zip(va).map(|(x, y)| x * y).collect();
                    let dst = acc(&mut grads, *a, g.len());
                    dst.iter_mut().zip(&da).for_each(|(d, v)| *d += v);
                    let dst = acc(&mut grads, *b, g.len());
                    dst.iter_mut().zip(&db).for_each(|(d, v)| *d += v);
                }
                Op::Scale(a, c) => {
                    let dst = acc(&mut grads, *a, g.len());
                    dst.iter_mut().zip(&g).for_each(|(d, v)| *d += c * v);
                }
                Op::Relu(a) => {
                    let x = self.nodes[*a].value.data();
                    let dst = acc(&mut grads, *a, g.len());
                    for ((d, v), xi) in dst.iter_mut().zip(&g).zip(x) {
                        if *xi > 0.0 {
                            *d += v;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let dst = acc(&mut grads, *a, g.len());
                    for ((d, v), yi) in dst.iter_mut().zip(&g).zip(y) {
                        *d += v * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    let dst = acc(&mut grads, *a, g.len());
                    for ((d, v), yi) in dst.iter_mut().zip(&g).zip(y) {
                        *d += v * yi * (1.0 - yi);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        let dst = acc(&mut grads, p, len);
                        dst.iter_mut()
                            .zip(&g[offset..offset + len])
                            .for_each(|(d, v)| *d += v);
                        offset += len;
                    }
                }
                Op::Mean(parts) => {
                    let n = parts.len() as f64;
                    for &p in parts {
                        let dst = acc(&mut grads, p, g.len());
                        dst.iter_mut().zip(&g).for_each(|(d, v)| *d += v / n);
                    }
                }
                Op::Sum(a) => {
                    let len = self.nodes[*a].value.len();
                    let dst = acc(&mut grads, *a, len);
                    dst.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::L2Norm { src, norm } => {
                    if *norm > 0.0 {
                        // d(x/|x|) = (g - y (y·g)) / |x|
                        let y = node.value.data();
                        let dot: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
                        let dst = acc(&mut grads, *src, g.len());
                        for ((d, gi), yi) in dst.iter_mut().zip(&g).zip(y) {
                            *d += (gi - yi * dot) / norm;
                        }
                    }
                }
                Op::Reshape(a) => {
                    let dst = acc(&mut grads, *a, g.len());
                    dst.iter_mut().zip(&g).for_each(|(d, v)| *d += v);
                }
                Op::Slice { src, start } => {
                    let len = self.nodes[*src].value.len();
                    let dst = acc(&mut grads, *src, len);
                    dst[*start..*start + g.len()]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(d, v)| *d += v);
                }
                Op::SoftmaxCe {
                    logits,
                    target,
                    probs,
                } => {
                    let dst = acc(&mut grads, *logits, probs.len());
                    for (c, (d, p)) in dst.iter_mut().zip(probs).enumerate() {
                        let onehot = if c == *target { 1.0 } else { 0.0 };
                        *d += g[0] * (p - onehot);
                    }
                }
                Op::EdgeConv(ec) => {
                    let plan = &ec.plan;
                    let (n, d_in) = self.nodes[ec.x].value.dims2();
                    let d_out = self.nodes[ec.b].value.len();
                    let size = d_out * d_in;
                    let xd = self.nodes[ec.x].value.data();
                    let mut dx = vec![0.0; n * d_in];
                    let mut dthetas = vec![0.0; ec.thetas.len()];
                    let mut gm = vec![0.0; d_out];
                    for &(t, s, a) in &plan.messages {
                        let scale = plan.inv_degree[t];
                        gm.iter_mut()
                            .zip(&g[t * d_out..(t + 1) * d_out])
                            .for_each(|(d, v)| *d = v * scale);
                        let theta = &ec.thetas[a * size..(a + 1) * size];
                        let dtheta = &mut dthetas[a * size..(a + 1) * size];
                        let xs = &xd[s * d_in..(s + 1) * d_in];
                        let dxs = &mut dx[s * d_in..(s + 1) * d_in];
                        for (k, &gk) in gm.iter().enumerate() {
                            if gk == 0.0 {
                                continue;
                            }
                            let row = k * d_in..(k + 1) * d_in;
                            dxs.iter_mut().zip(&theta[row.clone()]).for_each(|(d, th)| *d += th * gk);
                            dtheta[row].iter_mut().zip(xs).for_each(|(d, xv)| *d += gk * xv);
                        }
                    }
                    let dst = acc(&mut grads, ec.x, n * d_in);
                    dst.iter_mut().zip(&dx).for_each(|(d, v)| *d += v);
                    let dst = acc(&mut grads, ec.b, d_out);
                    for row in g.chunks(d_out) {
                        dst.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                    }
                    let dst = acc(&mut grads, ec.fb, size);
                    for dtheta in dthetas.chunks(size) {
                        dst.iter_mut().zip(dtheta).for_each(|(d, v)| *d += v);
                    }
                    let e = plan.edge_dim;
                    let dst = acc(&mut grads, ec.w, size * e);
                    for (a, dtheta) in dthetas.chunks(size).enumerate() {
                        // dW += vec(dtheta) · attrᵀ
                        gemm_nn(dtheta, plan.attr(a), dst, size, 1, e);
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{check_input_gradients, max_rel_error};
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn conv_fixture() -> (Rc<EdgeConvPlan>, Vec<Tensor>) {
        let attrs = vec![vec![0.5, -1.0], vec![0.2, 0.7]];
        let msgs = vec![(0, 0, 0), (1, 1, 1), (2, 2, 0), (0, 1, 1), (1, 0, 1), (1, 2, 0), (2, 1, 0)];
        let plan = Rc::new(EdgeConvPlan::new(3, &attrs, msgs).unwrap());
        let vals = |n: usize, k: f64| (0..n).map(|i| ((i as f64 + 1.0) * k).sin()).collect::<Vec<f64>>();
        let inputs = vec![
            Tensor::matrix(6, 2, vals(12, 0.7)).unwrap(),
            Tensor::column(vals(6, 1.3)),
            Tensor::column(vals(3, 2.1)),
            Tensor::matrix(3, 2, vals(6, 0.4)).unwrap(),
        ];
        (plan, inputs)
    }

    #[test]
    fn edge_conv_matches_per_message_matmuls() {
        let (plan, inputs) = conv_fixture();
        let mut tape = Tape::new();
        let v: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
        let out = tape.edge_conv(v[0], v[1], v[2], v[3], plan.clone()).unwrap();
        assert_eq!(tape.value(out).shape(), &[3, 3]);
        for i in 0..3 {
            let mut expect = vec![0.0; 3];
            let incoming: Vec<_> = plan.messages.iter().filter(|m| m.0 == i).collect();
            for &&(_, s, a) in &incoming {
                let mut theta = inputs[1].data().to_vec();
                gemm_nn(inputs[0].data(), plan.attr(a), &mut theta, 6, 2, 1);
                let th = Tensor::matrix(3, 2, theta).unwrap();
                let xs = Tensor::column(inputs[3].data()[s * 2..s * 2 + 2].to_vec());
                let m = crate::numerics::matmul_raw(&th, &xs).unwrap();
                expect.iter_mut().zip(m.data()).for_each(|(e, v)| *e += v / incoming.len() as f64);
            }
            expect.iter_mut().zip(inputs[2].data()).for_each(|(e, b)| *e += b);
            assert!(close(&tape.value(out).data()[i * 3..i * 3 + 3], &expect, 1e-12));
        }
    }

    #[test]
    fn edge_conv_gradients_match_finite_differences() {
        let (plan, inputs) = conv_fixture();
        let report = check_input_gradients(&inputs, |t, v| {
            let out = t.edge_conv(v[0], v[1], v[2], v[3], plan.clone())?;
            let sq = t.mul(out, out)?;
            let tanh = t.tanh(out);
            let sum = t.add(sq, tanh)?;
            Ok(t.sum(sum))
        })
        .unwrap();
        assert!(max_rel_error(&report) < 1e-6, "{report:?}");
    }

    #[test]
    fn edge_conv_plan_contracts() {
        assert!(EdgeConvPlan::new(2, &[vec![1.0]], vec![(0, 0, 0)]).is_err());
        assert!(EdgeConvPlan::new(1, &[vec![1.0]], vec![(0, 1, 0)]).is_err());
        assert!(EdgeConvPlan::new(1, &[vec![1.0], vec![1.0, 2.0]], vec![(0, 0, 0)]).is_err());
        let (plan, inputs) = conv_fixture();
        let mut tape = Tape::new();
        let v: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
        assert!(matches!(tape.edge_conv(v[0], v[1], v[2], v[2], plan), Err(Error::Dimension { .. })));
    }

    #[test]
    fn matmul_examples() {
        let mut tape = Tape::new();
        let i3 = tape.input(Tensor::identity(3));
        let v = tape.input(Tensor::column(vec![0.3, -2.0, 7.5]));
        let out = tape.matmul(i3, v).unwrap();
        assert_eq!(tape.value(out).data(), &[0.3, -2.0, 7.5]);

        let a = tape.input(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let ones = tape.input(Tensor::column(vec![1.0, 1.0]));
        let out = tape.matmul(a, ones).unwrap();
        assert_eq!(tape.value(out).data(), &[3.0, 7.0]);
        assert_eq!(tape.value(out).shape(), &[2, 1]);

        let z = tape.input(Tensor::zeros(&[4, 3]));
        let out = tape.matmul(z, v).unwrap();
        assert!(tape.value(out).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::zeros(&[2, 3]));
        let b = tape.input(Tensor::zeros(&[2, 3]));
        let msg = tape.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3] vs [2, 3]"), "{msg}");
    }

    #[test]
    fn elementwise_examples() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::column(vec![-1.0, 0.0, 2.0]));
        let r = tape.elementwise(ElementwiseOp::Relu, &[x]).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

        let v = Tensor::column(vec![0.25, -1.5, 3.0]);
        let vs: Vec<Var> = (0..4).map(|_| tape.input(v.clone())).collect();
        let m = tape.elementwise(ElementwiseOp::Mean, &vs).unwrap();
        assert!(close(tape.value(m).data(), v.data(), 1e-15));

        let y = tape.input(Tensor::column(vec![3.0, 4.0]));
        let n = tape.elementwise(ElementwiseOp::L2Norm, &[y]).unwrap();
        assert!(close(tape.value(n).data(), &[0.6, 0.8], 1e-15));
    }

    #[test]
    fn incompatible_shapes_are_dimension_errors() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::column(vec![1.0, 2.0]));
        let b = tape.input(Tensor::column(vec![1.0, 2.0, 3.0]));
        assert!(matches!(tape.add(a, b), Err(Error::Dimension { .. })));
        assert!(matches!(tape.mean(&[a, b]), Err(Error::Dimension { .. })));
        assert!(matches!(
            tape.elementwise(ElementwiseOp::Mul, &[a, b]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_vector_l2norm_returns_zero_and_warns() {
        let mut tape = Tape::new();
        let z = tape.input(Tensor::zeros(&[3, 1]));
        let n = tape.l2norm(z);
        assert_eq!(tape.value(n).data(), &[0.0, 0.0, 0.0]);
        assert_eq!(tape.warnings().len(), 1);
    }

    #[test]
    fn cross_entropy_examples() {
        let mut tape = Tape::new();
        let uniform = tape.input(Tensor::column(vec![0.7; 4]));
        let l = tape.softmax_cross_entropy(uniform, 2).unwrap();
        assert!((tape.value(l).data()[0] - 4f64.ln()).abs() < 1e-12);

        let peaked = tape.input(Tensor::column(vec![-1000.0, 1000.0, -1000.0]));
        let l = tape.softmax_cross_entropy(peaked, 1).unwrap();
        assert!(tape.value(l).data()[0].abs() < 1e-12);

        // -ln(e^1 / (e^1 + e^2 + e^3)) = ln(1 + e + e^2)
        let z = tape.input(Tensor::column(vec![1.0, 2.0, 3.0]));
        let l = tape.softmax_cross_entropy(z, 0).unwrap();
        let want = (1.0 + 1f64.exp() + 2f64.exp()).ln();
        assert!((tape.value(l).data()[0] - want).abs() < 1e-12);
        assert!((want - 2.4076).abs() < 1e-4);

        assert!(matches!(
            tape.softmax_cross_entropy(z, 3),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let z = tape.input(Tensor::column(vec![1.0, 2.0, 3.0]));
        let l = tape.softmax_cross_entropy(z, 0).unwrap();
        let grads = tape.backward(l, &mut store).unwrap();
        let mut want = softmax(&[1.0, 2.0, 3.0]);
        want[0] -= 1.0;
        assert!(close(grads.get(z).unwrap(), &want, 1e-12));
    }

    #[test]
    fn backward_basic_contracts() {
        let mut store = ParamStore::new();
        let w = store
            .add("w", Tensor::column(vec![0.5, -0.25, 2.0]))
            .unwrap();
        let x_val = vec![1.5, -3.0, 0.125];

        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let x = tape.input(Tensor::column(x_val.clone()));
        let prod = tape.mul(wv, x).unwrap();
        let loss = tape.sum(prod);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(w).grad.data(), x_val.as_slice());

        // accumulation without reset
        tape.backward(loss, &mut store).unwrap();
        let doubled: Vec<f64> = x_val.iter().map(|v| 2.0 * v).collect();
        assert_eq!(store.get(w).grad.data(), doubled.as_slice());

        store.zero_grad();
        let mut tape = Tape::new();
        let _wv = tape.param(&store, w);
        let c = tape.input(Tensor::scalar(3.0));
        let loss = tape.scale(c, 2.0);
        tape.backward(loss, &mut store).unwrap();
        assert!(store.get(w).grad.data().iter().all(|&g| g == 0.0));

        let v = tape.input(Tensor::column(vec![1.0, 2.0]));
        assert!(matches!(
            tape.backward(v, &mut store),
            Err(Error::Contract(_))
        ));
    }

    fn composed(tape: &mut Tape, xs: &[Var]) -> Result<Var> {
        // exercises every differentiable op once
        let (a, b, c) = (xs[0], xs[1], xs[2]);
        let ab = tape.matmul(a, b)?; // [3×2]·[2×1]
        let t = tape.tanh(ab);
        let s = tape.sigmoid(c);
        let m = tape.mul(t, s)?;
        let r = tape.relu(m);
        let sum = tape.add(r, t)?;
        let diff = tape.sub(sum, s)?;
        let n = tape.l2norm(diff);
        let mean = tape.mean(&[n, t, s])?;
        let cat = tape.concat(&[mean, b])?;
        let rs = tape.reshape(cat, &[5])?;
        let sl = tape.slice(rs, 1, 4)?;
        let sc = tape.scale(sl, 1.7);
        tape.softmax_cross_entropy(sc, 2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn composed_graph_matches_finite_differences(
            a in prop::collection::vec(-1.0f64..1.0, 6),
            b in prop::collection::vec(-1.0f64..1.0, 2),
            c in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let inputs = vec![
                Tensor::matrix(3, 2, a).unwrap(),
                Tensor::column(b),
                Tensor::column(c),
            ];
            let report = check_input_gradients(&inputs, composed).unwrap();
            prop_assert!(max_rel_error(&report) < 1e-4, "{:?}", report);
        }

        #[test]
        fn l2norm_has_unit_norm(v in prop::collection::vec(-1.0f64..1.0, 1..40)) {
            prop_assume!(v.iter().any(|x| *x != 0.0));
            let mut tape = Tape::new();
            let x = tape.input(Tensor::column(v));
            let n = tape.l2norm(x);
            prop_assert!((tape.value(n).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn replay_is_bit_identical(
            a in prop::collection::vec(-1.0f64..1.0, 6),
            b in prop::collection::vec(-1.0f64..1.0, 2),
            c in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let run = || {
                let mut store = ParamStore::new();
                let mut tape = Tape::new();
                let xs = vec![
                    tape.input(Tensor::matrix(3, 2, a.clone()).unwrap()),
                    tape.input(Tensor::column(b.clone())),
                    tape.input(Tensor::column(c.clone())),
                ];
                let loss = composed(&mut tape, &xs).unwrap();
                let grads = tape.backward(loss, &mut store).unwrap();
                let mut out = tape.value(loss).data().to_vec();
                for &x in &xs {
                    out.extend_from_slice(grads.get(x).unwrap());
                }
                out.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            };
            prop_assert_eq!(run(), run());
        }
    }
}
