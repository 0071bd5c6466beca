//! Graph encoder, activity head and action decoder.

use std::rc::Rc;

use super::config::{Conditioning, ModelConfig, StepReduction};
use super::ecc::{readout, uniform, EccLayer, GraphInput};
use crate::error::{Error, Result};
use crate::numerics::{softmax, Checkpoint, ParamId, ParamStore, Tape, Tensor, Var};
use crate::seed;

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

impl Dense {
    fn register(store: &mut ParamStore, prefix: &str, d_in: usize, d_out: usize, rng: &mut seed::Rng) -> Result<Self> {
        let bound = (6.0 / (d_in + d_out) as f64).sqrt();
        Ok(Dense {
            w: store.add(format!("{prefix}.w"), uniform(d_out, d_in, bound, rng))?,
            b: store.add(format!("{prefix}.b"), Tensor::zeros(&[d_out, 1]))?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let y = tape.matmul(w, x)?;
        tape.add(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
struct LstmLayer {
    /// Gates stacked as input, forget, cell, output: `[4H, in + H]`.
    w: ParamId,
    b: ParamId,
    hidden: usize,
}

impl LstmLayer {
    fn register(store: &mut ParamStore, prefix: &str, d_in: usize, hidden: usize, rng: &mut seed::Rng) -> Result<Self> {
        let bound = (1.0 / hidden as f64).sqrt();
        let w = store.add(format!("{prefix}.w"), uniform(4 * hidden, d_in + hidden, bound, rng))?;
        let mut b = Tensor::zeros(&[4 * hidden, 1]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        let b = store.add(format!("{prefix}.b"), b)?;
        Ok(LstmLayer { w, b, hidden })
    }

    fn step(&self, tape: &mut Tape, w: Var, b: Var, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hsz = self.hidden;
        let xh = tape.concat(&[x, h])?;
        let z = tape.matmul(w, xh)?;
        let z = tape.add(z, b)?;
        let i = tape.slice(z, 0, hsz)?;
        let f = tape.slice(z, hsz, hsz)?;
        let g = tape.slice(z, 2 * hsz, hsz)?;
        let o = tape.slice(z, 3 * hsz, hsz)?;
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }
}

/// Forward pass outputs, all living on one tape.
#[derive(Debug, Clone)]
pub struct Forward {
    pub readout: Var,
    pub activity_logits: Var,
    pub step_logits: Vec<Var>,
}

/// Loss pieces as plain numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub activity: f64,
    pub action: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub activity: usize,
    pub activity_probs: Vec<f64>,
    /// Action tokens without the end-of-sequence token.
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    ecc: Vec<EccLayer>,
    head: [Dense; 2],
    lstm: Vec<LstmLayer>,
    out: Dense,
}

impl Model {
    pub fn new(config: ModelConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng_for(init_seed, "model-init", 0);
        let mut store = ParamStore::new();
        let mut ecc = Vec::new();
        let mut d_in = config.node_dim;
        for l in 0..config.ecc_layers {
            ecc.push(EccLayer::register(
                &mut store,
                &format!("ecc{l}"),
                d_in,
                config.ecc_hidden,
                config.edge_dim,
                &mut rng,
            )?);
            d_in = config.ecc_hidden;
        }
        let head = [
            Dense::register(&mut store, "head1", config.readout_dim(), config.head_hidden, &mut rng)?,
            Dense::register(&mut store, "head2", config.head_hidden, config.activity_classes, &mut rng)?,
        ];
        let mut lstm = Vec::new();
        let mut d_in = config.decoder_input_dim();
        for k in 0..config.lstm_layers {
            lstm.push(LstmLayer::register(&mut store, &format!("lstm{k}"), d_in, config.lstm_hidden, &mut rng)?);
            d_in = config.lstm_hidden;
        }
        let out = Dense::register(&mut store, "out", config.lstm_hidden, config.action_vocab, &mut rng)?;
        Ok(Model {
            config,
            store,
            ecc,
            head,
            lstm,
            out,
        })
    }

    /// ECC stack and readout; returns the graph vector.
    pub fn encode(&self, tape: &mut Tape, graph: &GraphInput) -> Result<Var> {
        let plan = Rc::new(graph.plan()?);
        let mut h = tape.input(graph.feature_matrix()?);
        let mut layers = Vec::with_capacity(self.ecc.len());
        for (l, layer) in self.ecc.iter().enumerate() {
            let out = layer.forward(tape, &self.store, &plan, h)?;
            layers.push(out);
            if l + 1 < self.ecc.len() {
                h = tape.relu(out);
            }
        }
        readout(tape, &layers)
    }

    pub fn activity_logits(&self, tape: &mut Tape, readout: Var) -> Result<Var> {
        let h = self.head[0].forward(tape, &self.store, readout)?;
        let h = tape.relu(h);
        self.head[1].forward(tape, &self.store, h)
    }

    /// Unrolls the decoder for `steps` steps. `condition` is the activity
    /// one-hot (or zeros). With token feedback, `feedback[j]` is the token
    /// fed at step `j + 1`.
    pub fn decode(&self, tape: &mut Tape, readout: Var, condition: Var, steps: usize, feedback: &[usize]) -> Result<Vec<Var>> {
        let mut logits = Vec::with_capacity(steps);
        let params: Vec<(Var, Var)> = self
            .lstm
            .iter()
            .map(|l| (tape.param(&self.store, l.w), tape.param(&self.store, l.b)))
            .collect();
        let hsz = self.config.lstm_hidden;
        let mut state: Vec<(Var, Var)> = self
            .lstm
            .iter()
            .map(|_| (tape.input(Tensor::zeros(&[hsz, 1])), tape.input(Tensor::zeros(&[hsz, 1]))))
            .collect();
        let base = tape.concat(&[readout, condition])?;
        for j in 0..steps {
            let mut x = if self.config.feed_previous_token {
                let mut prev = vec![0.0; self.config.action_vocab];
                if j > 0 {
                    let t = *feedback.get(j - 1).ok_or_else(|| {
                        Error::Contract(format!("no fed-back token for decoder step {j}"))
                    })?;
                    prev[t] = 1.0;
                }
                let p = tape.input(Tensor::column(prev));
                tape.concat(&[base, p])?
            } else {
                base
            };
            for (k, layer) in self.lstm.iter().enumerate() {
                let (w, b) = params[k];
                let (h, c) = layer.step(tape, w, b, x, state[k].0, state[k].1)?;
                state[k] = (h, c);
                x = h;
            }
            logits.push(self.out.forward(tape, &self.store, x)?);
        }
        Ok(logits)
    }

    fn condition(&self, tape: &mut Tape, activity: Option<usize>) -> Result<Var> {
        let mut onehot = vec![0.0; self.config.activity_classes];
        if let Some(a) = activity {
            *onehot.get_mut(a).ok_or(Error::Index {
                what: "activity class",
                index: a,
                len: self.config.activity_classes,
            })? = 1.0;
        }
        Ok(tape.input(Tensor::column(onehot)))
    }

    /// Training-time forward pass: decoder conditioned on the gold activity
    /// (per the conditioning mode) and unrolled over the gold tokens plus EOS.
    pub fn forward_teacher(&self, tape: &mut Tape, graph: &GraphInput, activity: usize, gold: &[usize]) -> Result<Forward> {
        let readout = self.encode(tape, graph)?;
        let activity_logits = self.activity_logits(tape, readout)?;
        let cond = match self.config.conditioning {
            Conditioning::Hierarchical => Some(activity),
            Conditioning::Flat | Conditioning::ActionsOnly => None,
        };
        let condition = self.condition(tape, cond)?;
        let step_logits = self.decode(tape, readout, condition, gold.len() + 1, gold)?;
        Ok(Forward {
            readout,
            activity_logits,
            step_logits,
        })
    }

    /// Joint loss on a teacher-forced forward pass. Returns the scalar
    /// loss variable and its parts.
    pub fn loss(&self, tape: &mut Tape, fwd: &Forward, activity: usize, gold: &[usize]) -> Result<(Var, LossParts)> {
        if fwd.step_logits.len() != gold.len() + 1 {
            return Err(Error::Contract(format!(
                "{} decoder steps for {} gold tokens plus EOS",
                fwd.step_logits.len(),
                gold.len()
            )));
        }
        let targets = gold.iter().copied().chain([self.config.eos()]);
        let mut terms = Vec::with_capacity(gold.len() + 1);
        for (logits, t) in fwd.step_logits.iter().zip(targets) {
            terms.push(tape.softmax_cross_entropy(*logits, t)?);
        }
        let stacked = tape.concat(&terms)?;
        let mut action = tape.sum(stacked);
        if self.config.step_reduction == StepReduction::Mean {
            action = tape.scale(action, 1.0 / terms.len() as f64);
        }
        let act_ce = tape.softmax_cross_entropy(fwd.activity_logits, activity)?;
        let total = if self.config.conditioning == Conditioning::ActionsOnly {
            action
        } else {
            tape.add(act_ce, action)?
        };
        let parts = LossParts {
            total: tape.value(total).data()[0],
            activity: tape.value(act_ce).data()[0],
            action: tape.value(action).data()[0],
        };
        Ok((total, parts))
    }

    /// Hierarchical inference: the decoder is conditioned on the predicted
    /// activity and decoded greedily until EOS or the length cap.
    pub fn predict(&self, graph: &GraphInput) -> Result<Prediction> {
        let mut tape = Tape::new();
        let readout = self.encode(&mut tape, graph)?;
        let logits = self.activity_logits(&mut tape, readout)?;
        let activity_probs = softmax(tape.value(logits).data());
        let activity = argmax(&activity_probs);
        let cond = match self.config.conditioning {
            Conditioning::Hierarchical => Some(activity),
            _ => None,
        };
        let condition = self.condition(&mut tape, cond)?;
        let eos = self.config.eos();
        let max = self.config.max_decode_len;
        let mut actions = Vec::new();
        if self.config.feed_previous_token {
            // Feedback needs the previous argmax, so unroll one step more
            // each round on a fresh tape.
            for steps in 1..=max {
                let mut t = Tape::new();
                let r = self.encode(&mut t, graph)?;
                let c = self.condition(&mut t, cond)?;
                let out = self.decode(&mut t, r, c, steps, &actions)?;
                let tok = argmax(t.value(*out.last().expect("steps >= 1")).data());
                if tok == eos {
                    break;
                }
                actions.push(tok);
            }
        } else {
            let out = self.decode(&mut tape, readout, condition, max, &[])?;
            for l in out {
                let tok = argmax(tape.value(l).data());
                if tok == eos {
                    break;
                }
                actions.push(tok);
            }
        }
        Ok(Prediction {
            activity,
            activity_probs,
            actions,
        })
    }

    pub fn checkpoint(&self, extra: Vec<(String, String)>) -> Checkpoint {
        let mut meta = self.config.to_pairs();
        meta.extend(extra);
        Checkpoint::from_store(&self.store, meta)
    }

    /// Rebuilds a model from a checkpoint's stored config and weights.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let keys = ModelConfig::full_size(2).to_pairs();
        let pairs: Vec<(&str, &str)> = keys
            .iter()
            .filter_map(|(k, _)| ckpt.meta(k).map(|v| (k.as_str(), v)))
            .collect();
        if pairs.len() != keys.len() {
            return Err(Error::format("checkpoint", "missing model configuration"));
        }
        let config = ModelConfig::from_pairs(pairs)?;
        let mut model = Model::new(config, 0)?;
        ckpt.load_into(&mut model.store)?;
        Ok(model)
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
