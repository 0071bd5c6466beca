//! Central finite-difference oracle for tape gradients.
//!
//! The numeric side only ever reads forward values, so it stays independent
//! of the reverse pass it is checking.

use super::param::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

pub const STEP: f64 = 1e-5;
/// Denominator floor so that gradients that are numerically zero on both
/// sides do not produce meaningless ratios.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradEntry {
    pub fn rel_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(REL_FLOOR);
        (self.analytic - self.numeric).abs() / scale
    }
}

pub fn max_rel_error(entries: &[GradEntry]) -> f64 {
    entries.iter().map(GradEntry::rel_error).fold(0.0, f64::max)
}

fn scalar_of(tape: &Tape, v: Var) -> f64 {
    tape.value(v).data()[0]
}

/// Checks d f / d inputs where `f` builds a scalar from tape inputs.
pub fn check_input_gradients<F>(inputs: &[Tensor], f: F) -> Result<Vec<GradEntry>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.input(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(scalar_of(&tape, out))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let mut scratch = ParamStore::new();
    let grads = tape.backward(out, &mut scratch)?;

    let mut entries = Vec::new();
    let mut work = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).map(<[f64]>::to_vec);
        for i in 0..work[k].len() {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + STEP;
            let plus = eval(&work)?;
            work[k].data_mut()[i] = orig - STEP;
            let minus = eval(&work)?;
            work[k].data_mut()[i] = orig;
            entries.push(GradEntry {
                name: format!("input{k}"),
                index: i,
                analytic: analytic.as_ref().map_or(0.0, |g| g[i]),
                numeric: (plus - minus) / (2.0 * STEP),
            });
        }
    }
    Ok(entries)
}

/// Checks d f / d params for every parameter element in `store`.
pub fn check_param_gradients<F>(store: &mut ParamStore, f: F) -> Result<Vec<GradEntry>>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    tape.backward(out, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();

    let mut entries = Vec::new();
    let ids: Vec<_> = store.ids().collect();
    for (id, grads) in ids.into_iter().zip(&analytic) {
        for (i, &g) in grads.iter().enumerate() {
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + STEP;
            let plus = {
                let mut t = Tape::new();
                let v = f(&mut t, store)?;
                scalar_of(&t, v)
            };
            store.get_mut(id).value.data_mut()[i] = orig - STEP;
            let minus = {
                let mut t = Tape::new();
                let v = f(&mut t, store)?;
                scalar_of(&t, v)
            };
            store.get_mut(id).value.data_mut()[i] = orig;
            entries.push(GradEntry {
                name: store.get(id).name.clone(),
                index: i,
                analytic: g,
                numeric: (plus - minus) / (2.0 * STEP),
            });
        }
    }
    store.zero_grad();
    Ok(entries)
}
