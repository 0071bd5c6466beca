//! Edge-conditioned convolution over activity graphs.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graphbuild::ActivityGraph;
use crate::numerics::{EdgeConvPlan, ParamId, ParamStore, Tape, Tensor, Var};
use crate::seed::Rng;

/// One incoming message: `target` aggregates `theta(attr) * feature(source)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub target: usize,
    pub source: usize,
    pub attr: usize,
}

/// Graph in the form the network consumes. Edge attributes are stored
/// once per distinct vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Vec<Vec<f64>>,
    pub attrs: Vec<Vec<f64>>,
    pub messages: Vec<Message>,
}

impl GraphInput {
    /// Neighbourhoods are undirected: every stored edge carries a message
    /// both ways, and a (target, source) pair only counts once, with the
    /// attribute of its first edge. Every node needs a self-loop.
    pub fn from_graph(graph: &ActivityGraph) -> Result<Self> {
        if graph.nodes.is_empty() {
            return Err(Error::Contract("graph has no nodes".into()));
        }
        let n = graph.nodes.len();
        let mut self_loop = vec![false; n];
        let mut seen = std::collections::HashSet::new();
        let mut attr_index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut attrs: Vec<Vec<f64>> = Vec::new();
        let mut messages = Vec::new();
        for e in &graph.edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::Contract(format!("edge ({}, {}) out of range", e.src, e.dst)));
            }
            if e.src == e.dst {
                self_loop[e.src] = true;
            }
            let key: Vec<u64> = e.attr.iter().map(|v| v.to_bits()).collect();
            let next = attrs.len();
            let a = *attr_index.entry(key).or_insert(next);
            if a == next {
                attrs.push(e.attr.clone());
            }
            for (target, source) in [(e.dst, e.src), (e.src, e.dst)] {
                if seen.insert((target, source)) {
                    messages.push(Message { target, source, attr: a });
                }
            }
        }
        if let Some(i) = self_loop.iter().position(|s| !s) {
            return Err(Error::Contract(format!("node {i} has no self-loop")));
        }
        Ok(GraphInput {
            features: graph.nodes.iter().map(|nd| nd.feature.0.clone()).collect(),
            attrs,
            messages,
        })
    }

    pub fn node_count(&self) -> usize {
        self.features.len()
    }

    /// Node features as a `nodes × d` matrix.
    pub fn feature_matrix(&self) -> Result<Tensor> {
        let d = self.features.first().map_or(0, Vec::len);
        if self.features.iter().any(|f| f.len() != d) {
            return Err(Error::Contract("node features differ in length".into()));
        }
        Tensor::matrix(self.features.len(), d, self.features.concat())
    }

    pub fn plan(&self) -> Result<EdgeConvPlan> {
        EdgeConvPlan::new(
            self.node_count(),
            &self.attrs,
            self.messages.iter().map(|m| (m.target, m.source, m.attr)).collect(),
        )
    }

    /// Same graph with nodes renumbered by `perm` (new index of old node i
    /// is `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> GraphInput {
        let mut features = vec![Vec::new(); self.features.len()];
        for (i, f) in self.features.iter().enumerate() {
            features[perm[i]] = f.clone();
        }
        GraphInput {
            features,
            attrs: self.attrs.clone(),
            messages: self
                .messages
                .iter()
                .map(|m| Message {
                    target: perm[m.target],
                    source: perm[m.source],
                    attr: m.attr,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EccLayer {
    pub d_in: usize,
    pub d_out: usize,
    pub edge_dim: usize,
    /// `[d_out * d_in, edge_dim]`
    pub filter_w: ParamId,
    /// `[d_out * d_in, 1]`
    pub filter_b: ParamId,
    /// `[d_out, 1]`
    pub bias: ParamId,
}

pub(crate) fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

impl EccLayer {
    pub fn register(store: &mut ParamStore, prefix: &str, d_in: usize, d_out: usize, edge_dim: usize, rng: &mut Rng) -> Result<Self> {
        // Label-embedding attributes have norm about sqrt(2), so theta
        // entries start near a dense layer's scale.
        let theta_bound = (3.0 / d_in as f64).sqrt();
        let filter_w = store.add(
            format!("{prefix}.filter_w"),
            uniform(d_out * d_in, edge_dim, theta_bound / 2f64.sqrt(), rng),
        )?;
        let filter_b = store.add(format!("{prefix}.filter_b"), uniform(d_out * d_in, 1, theta_bound, rng))?;
        let bias = store.add(format!("{prefix}.bias"), Tensor::zeros(&[d_out, 1]))?;
        Ok(EccLayer {
            d_in,
            d_out,
            edge_dim,
            filter_w,
            filter_b,
            bias,
        })
    }

    /// `v_i' = mean_{j in N(i)} theta(e_ij) v_j + b` for every row of the
    /// `nodes × d_in` input.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, plan: &Rc<EdgeConvPlan>, x: Var) -> Result<Var> {
        if plan.edge_dim() != self.edge_dim {
            return Err(Error::Dimension {
                op: "ecc edge attr",
                lhs: vec![self.edge_dim, 1],
                rhs: vec![plan.edge_dim(), 1],
            });
        }
        let w = tape.param(store, self.filter_w);
        let fb = tape.param(store, self.filter_b);
        let b = tape.param(store, self.bias);
        tape.edge_conv(w, fb, b, x, Rc::clone(plan))
    }
}

/// Per-layer node means, concatenated. Each layer is a `nodes × d`
/// matrix.
pub fn readout(tape: &mut Tape, layers: &[Var]) -> Result<Var> {
    let mut means = Vec::with_capacity(layers.len());
    for &h in layers {
        let (n, _) = tape.value(h).dims2();
        if n == 0 {
            return Err(Error::Contract("readout over an empty graph".into()));
        }
        let avg = tape.input(Tensor::filled(&[1, n], 1.0 / n as f64));
        means.push(tape.matmul(avg, h)?);
    }
    tape.concat(&means)
}
