//! Central finite-difference gradient checking.
//!
//! The numeric side only ever runs forward passes, so it stays independent
//! of the backward implementations it audits.

use super::{Graph, Tensor, Var};
use crate::error::Result;

pub const STEP: f64 = 1e-5;
/// Denominator floor for the relative error, so that gradients which are
/// zero on both sides are not reported as infinitely wrong.
pub const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_input: usize,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn reduce(g: &mut Graph<f64>, out: Var) -> Result<Var> {
    let n = g.value(out).len();
    if n == 1 {
        return Ok(out);
    }
    let weights: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin()).collect();
    let shape = g.shape(out).to_vec();
    let w = g.constant(Tensor::new(shape, weights)?);
    let prod = g.mul(out, w)?;
    Ok(g.sum_all(prod))
}

fn evaluate<F>(inputs: &[Tensor<f64>], build: &F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let out = build(&mut g, &vars)?;
    let out = reduce(&mut g, out)?;
    Ok(g.value(out).data()[0])
}

/// Compares the analytic gradient of `build` (reduced to a scalar with fixed
/// weights when it is not one) against central differences for every
/// element of every input. `build` must be deterministic.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars)?;
    let out = reduce(&mut g, out)?;
    let grads = g.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_input: 0,
        worst_index: 0,
        checked: 0,
    };
    let mut probe = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let zeros = vec![0.0; inputs[k].len()];
        let analytic = grads.get(*var).unwrap_or(&zeros);
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            probe[k].data_mut()[i] = orig + STEP;
            let up = evaluate(&probe, &build)?;
            probe[k].data_mut()[i] = orig - STEP;
            let down = evaluate(&probe, &build)?;
            probe[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let err = relative_error(analytic[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_input = k;
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
