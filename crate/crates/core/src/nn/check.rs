//! Central finite-difference gradient checking.

use super::{NnError, ParamStore, Tape, Tensor, Var};

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub entries_checked: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub eps: f64,
    /// Denominator floor so that near-zero gradients are compared absolutely.
    pub floor: f64,
    /// Check at most this many entries per parameter (evenly strided).
    pub max_entries: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eps: 1e-5,
            floor: 1e-5,
            max_entries: usize::MAX,
        }
    }
}

fn eval<E>(
    store: &ParamStore,
    f: &impl Fn(&mut Tape, &ParamStore) -> Result<Var, E>,
) -> Result<f64, E> {
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    Ok(tape.value(loss).item())
}

/// Compares backpropagated parameter gradients of `f` with central differences.
pub fn check_params<E: From<NnError>>(
    store: &ParamStore,
    options: CheckOptions,
    f: impl Fn(&mut Tape, &ParamStore) -> Result<Var, E>,
) -> Result<GradCheck, E> {
    let mut analytic = store.clone();
    analytic.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss)?.accumulate_into(&mut analytic);

    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for id in store.ids() {
        let len = store.value(id).len();
        let stride = len.div_ceil(options.max_entries.max(1)).max(1);
        for i in (0..len).step_by(stride) {
            let original = probe.value(id).data()[i];
            probe.value_mut(id).data_mut()[i] = original + options.eps;
            let up = eval(&probe, &f)?;
            probe.value_mut(id).data_mut()[i] = original - options.eps;
            let down = eval(&probe, &f)?;
            probe.value_mut(id).data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * options.eps);
            let a = analytic.grad(id).data()[i];
            let denom = a.abs().max(numeric.abs()).max(options.floor);
            worst = worst.max((a - numeric).abs() / denom);
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        entries_checked: checked,
    })
}

/// Gradient check with respect to plain input tensors.
pub fn check_inputs<E: From<NnError>>(
    inputs: &[Tensor],
    options: CheckOptions,
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var, E>,
) -> Result<GradCheck, E> {
    let mut store = ParamStore::new();
    let ids: Vec<_> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| store.add(format!("input{i}"), t.clone()))
        .collect();
    check_params(&store, options, |tape, s| {
        let vars = ids
            .iter()
            .map(|&id| tape.param(s, id))
            .collect::<Result<Vec<_>, NnError>>()?;
        f(tape, &vars)
    })
}
