//! Central finite differences over a parameter store, used as a gradient oracle.

use super::ParameterStore;
use crate::error::Result;
use crate::tensor::Scalar;

/// Returns a copy of `params` whose gradients hold
/// `(eval(θ + eps·e) - eval(θ - eps·e)) / (2·eps)` for every coordinate.
/// `eval` must be deterministic (freeze dropout by replaying the same rng state).
pub fn finite_diff_grad<S, F>(mut eval: F, params: &ParameterStore<S>, eps: f64) -> Result<ParameterStore<S>>
where
    S: Scalar,
    F: FnMut(&ParameterStore<S>) -> Result<f64>,
{
    let mut probe = params.clone();
    let mut grads = Vec::with_capacity(params.len());
    for id in params.ids() {
        let mut g = Vec::with_capacity(probe.param(id).len());
        for j in 0..probe.param(id).len() {
            let orig = probe.value(id)[j];
            probe.value_mut(id)[j] = S::cast(orig.widen() + eps);
            let plus = eval(&probe)?;
            probe.value_mut(id)[j] = S::cast(orig.widen() - eps);
            let minus = eval(&probe)?;
            probe.value_mut(id)[j] = orig;
            g.push(S::cast((plus - minus) / (2.0 * eps)));
        }
        grads.push(g);
    }
    for (p, g) in probe.iter_mut().zip(grads) {
        p.grad = g;
    }
    Ok(probe)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradComparison {
    pub max_relative_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
    pub compared: usize,
}

/// Compares the gradient fields of two stores with identical layout.
pub fn max_relative_error<S: Scalar>(a: &ParameterStore<S>, b: &ParameterStore<S>, floor: f64) -> GradComparison {
    let mut out = GradComparison {
        max_relative_error: 0.0,
        worst: String::new(),
        compared: 0,
    };
    for (pa, pb) in a.iter().zip(b.iter()) {
        assert_eq!(pa.name, pb.name, "stores have different layouts");
        for (j, (&ga, &gb)) in pa.grad.iter().zip(&pb.grad).enumerate() {
            let e = relative_error(ga.widen(), gb.widen(), floor);
            out.compared += 1;
            if e > out.max_relative_error || e.is_nan() {
                out.max_relative_error = e;
                out.worst = format!("{}[{j}]", pa.name);
            }
        }
    }
    out
}
