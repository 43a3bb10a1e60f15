//! Central finite-difference verification of analytic gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;

const FD_STEP: f64 = 1e-5;

/// Compares the tape's gradients against central finite differences for a
/// scalar-valued graph built by `build` over the given leaf tensors.
///
/// Returns a description of the first element whose analytic and numeric
/// gradients disagree beyond `abs_tol + rel_tol * max(|a|, |n|)`.
pub fn check_gradients<F>(
    inputs: &[Tensor],
    build: F,
    rel_tol: f64,
    abs_tol: f64,
) -> std::result::Result<(), String>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |tensors: &[Tensor]| -> std::result::Result<f64, String> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors
            .iter()
            .map(|t| tape.leaf(t.clone(), false))
            .collect();
        let loss = build(&mut tape, &vars).map_err(|e| e.to_string())?;
        tape.value(loss).item().map_err(|e| e.to_string())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = build(&mut tape, &vars).map_err(|e| e.to_string())?;
    let grads = tape.backward(loss).map_err(|e| e.to_string())?;

    let mut work: Vec<Tensor> = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]);
        for i in 0..input.numel() {
            let orig = input.data()[i];
            work[k].data_mut()[i] = orig + FD_STEP;
            let up = eval(&work)?;
            work[k].data_mut()[i] = orig - FD_STEP;
            let down = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.map_or(0.0, |g| g.data()[i]);
            let tol = abs_tol + rel_tol * a.abs().max(numeric.abs());
            if (a - numeric).abs() > tol {
                return Err(format!(
                    "input {k} element {i}: analytic {a:.8e} vs numeric {numeric:.8e} (tol {tol:.2e})"
                ));
            }
        }
    }
    Ok(())
}
