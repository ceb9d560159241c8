use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{CandidateMrf, DecreaseModulus};
use crate::numerics::dot;
use crate::system::ControlSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackChoice {
    pub control: usize,
    /// Selected limiting gradient.
    pub p: Vec<f64>,
    /// `<p, f(x, a)> / g(x, a)`, at most `-1`.
    pub quotient: f64,
    /// `g(x, a) = p0_bar l(x, a) + m(U(x))`.
    pub g: f64,
}

/// `g(x, a) = p0_bar l(x, a) + m(U(x))`; non-positive values mean the
/// modulus is inconsistent with the band.
pub fn denominator(
    system: &ControlSystem,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    x: &[f64],
    a: usize,
) -> Result<f64> {
    let g = mrf.p0_bar() * system.eval_lagrangian(x, a)? + modulus.eval(mrf.value(x));
    if !(g > 0.0) {
        return Err(Error::Modulus(format!("g = {g} is not positive at x = {x:?}")));
    }
    Ok(g)
}

/// Scans every `(p, a)` with `p in D*U(x)` and keeps the pair minimizing
/// `<p, f/g>`; ties go to the lowest indices.
pub fn feedback_select(
    system: &ControlSystem,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    x: &[f64],
) -> Result<FeedbackChoice> {
    let grads = mrf.limiting_gradients(x)?;
    let mut best: Option<FeedbackChoice> = None;
    for p in grads {
        for a in 0..system.control_count() {
            let g = denominator(system, mrf, modulus, x, a)?;
            let q = dot(&p, &system.eval_dynamics(x, a)?) / g;
            if best.as_ref().is_none_or(|b| q < b.quotient) {
                best = Some(FeedbackChoice {
                    control: a,
                    p: p.clone(),
                    quotient: q,
                    g,
                });
            }
        }
    }
    let best = best.ok_or_else(|| Error::Config("empty control set".into()))?;
    if best.quotient > -1.0 {
        return Err(Error::FeedbackGap {
            x: x.to_vec(),
            best: best.quotient,
        });
    }
    Ok(best)
}
