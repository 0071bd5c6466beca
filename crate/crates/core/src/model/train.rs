use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::ecc::GraphInput;
use super::network::{LossParts, Model};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Tape};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub id: String,
    pub graph: GraphInput,
    pub activity: usize,
    /// Remaining gold action tokens, without EOS.
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub activity: f64,
    pub action: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLoss>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,total,activity,action\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.total, e.activity, e.action);
        }
        out
    }
}

/// Forward, loss and backward for one sample; gradients accumulate in
/// the model's store.
pub fn accumulate(model: &mut Model, sample: &TrainingSample) -> Result<LossParts> {
    let mut tape = Tape::new();
    let fwd = model.forward_teacher(&mut tape, &sample.graph, sample.activity, &sample.actions)?;
    let (loss, parts) = model.loss(&mut tape, &fwd, sample.activity, &sample.actions)?;
    tape.backward(loss, &mut model.store)?;
    Ok(parts)
}

/// Adam over shuffled mini-batches for `config.epochs` epochs. Losses in
/// the log are per-sample means over each epoch.
pub fn train(model: &mut Model, samples: &[TrainingSample], seed: u64) -> Result<TrainLog> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let mut adam = AdamState::new(&model.store, model.config.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batch = model.config.batch_size;
    let mut log = TrainLog::default();
    for epoch in 1..=model.config.epochs {
        order.shuffle(&mut seed::rng_for(seed, "epoch-order", epoch as u64));
        let mut sums = (0.0, 0.0, 0.0);
        for chunk in order.chunks(batch) {
            model.store.zero_grad();
            for &i in chunk {
                let p = accumulate(model, &samples[i])?;
                if !p.total.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                sums.0 += p.total;
                sums.1 += p.activity;
                sums.2 += p.action;
            }
            model.store.scale_grads(1.0 / chunk.len() as f64);
            adam.step(&mut model.store).map_err(|e| match e {
                Error::Numeric(_) => Error::Diverged { epoch },
                other => other,
            })?;
        }
        let n = samples.len() as f64;
        let entry = EpochLoss {
            epoch,
            total: sums.0 / n,
            activity: sums.1 / n,
            action: sums.2 / n,
        };
        log::debug!("epoch {epoch}: loss {:.4}", entry.total);
        log.epochs.push(entry);
    }
    model.store.zero_grad();
    Ok(log)
}
