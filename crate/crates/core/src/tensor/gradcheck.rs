//! Central finite-difference check of [`Graph::backward`].

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Finite-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Magnitude below which gradient entries are compared absolutely. Central
/// differences at `h = 1e-5` carry roughly `1e-10` of absolute noise, so
/// tiny true gradients cannot be resolved relatively.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, GRADCHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
    (analytic - numeric).abs() / scale
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<(Graph, Vec<Var>, Var)>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).numel() != 1 {
        return Err(Error::Shape("gradcheck function must return a scalar".into()));
    }
    Ok((g, vars, out))
}

/// Worst relative error between backprop gradients and central differences
/// over every element of every input. `f` must build a scalar from the
/// provided variables.
pub fn gradcheck<F>(inputs: &[Tensor], f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let (mut g, vars, out) = evaluate(inputs, &f)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| {
            g.grad(*v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; g.value(*v).numel()])
        })
        .collect();

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (ti, grads) in analytic.iter().enumerate() {
        for (ei, &a) in grads.iter().enumerate() {
            let orig = inputs[ti].data()[ei];
            probe[ti].data_mut()[ei] = orig + GRADCHECK_STEP;
            let plus = evaluate(&probe, &f)?.0.value(out).item();
            probe[ti].data_mut()[ei] = orig - GRADCHECK_STEP;
            let minus = evaluate(&probe, &f)?.0.value(out).item();
            probe[ti].data_mut()[ei] = orig;
            let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}
