//! Time reparameterization `dt/ds = psi / g` of a synthesized leg.

use serde::{Deserialize, Serialize};

use super::feedback::denominator;
use super::leg::{cutoff, reparameterized_field, LegResult};
use crate::error::Result;
use crate::lyapunov::{CandidateMrf, DecreaseModulus};
use crate::system::ControlSystem;

/// Quantities accumulated along a leg, aligned with `LegResult::samples`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedLeg {
    pub t: Vec<f64>,
    /// Running cost `int l dt`.
    pub cost: Vec<f64>,
    /// `int m(U(z)) dt`.
    pub m_integral: Vec<f64>,
    /// Hermite midpoint states of each interval (`len - 1` entries).
    pub midpoints: Vec<Vec<f64>>,
    /// Sum of |Simpson - trapezoid| over all intervals, all three integrals.
    pub quadrature_error: f64,
}

impl TimedLeg {
    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    pub fn total_cost(&self) -> f64 {
        *self.cost.last().unwrap_or(&0.0)
    }
}

/// Integrates `dt = psi/g ds`, `l dt` and `m(U) dt` over each substep by
/// Simpson's rule on the cubic Hermite interpolant of the leg.
pub fn reparam_to_time(
    leg: &LegResult,
    system: &ControlSystem,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
) -> Result<TimedLeg> {
    let n = leg.samples.len();
    let mut out = TimedLeg {
        t: vec![0.0; n],
        cost: vec![0.0; n],
        m_integral: vec![0.0; n],
        midpoints: Vec::with_capacity(n.saturating_sub(1)),
        quadrature_error: 0.0,
    };
    let weights = |z: &[f64], a: usize| -> Result<[f64; 3]> {
        let u = mrf.value(z);
        let w = cutoff(u, leg.mu_hat, leg.sigma) / denominator(system, mrf, modulus, z, a)?;
        Ok([w, w * system.eval_lagrangian(z, a)?, w * modulus.eval(u)])
    };
    for i in 1..n {
        let (sa, sb) = (&leg.samples[i - 1], &leg.samples[i]);
        let a = leg.controls[sb.step];
        let h = sb.s - sa.s;
        let fa = reparameterized_field(system, mrf, modulus, &sa.x, a, leg.mu_hat, leg.sigma)?;
        let fb = reparameterized_field(system, mrf, modulus, &sb.x, a, leg.mu_hat, leg.sigma)?;
        let zm: Vec<f64> = (0..sa.x.len())
            .map(|k| 0.5 * (sa.x[k] + sb.x[k]) + h / 8.0 * (fa[k] - fb[k]))
            .collect();
        let wa = weights(&sa.x, a)?;
        let wm = weights(&zm, a)?;
        let wb = weights(&sb.x, a)?;
        let mut inc = [0.0; 3];
        for q in 0..3 {
            inc[q] = h / 6.0 * (wa[q] + 4.0 * wm[q] + wb[q]);
            out.quadrature_error += (inc[q] - 0.5 * h * (wa[q] + wb[q])).abs();
        }
        out.t[i] = out.t[i - 1] + inc[0];
        out.cost[i] = out.cost[i - 1] + inc[1];
        out.m_integral[i] = out.m_integral[i - 1] + inc[2];
        out.midpoints.push(zm);
    }
    Ok(out)
}
