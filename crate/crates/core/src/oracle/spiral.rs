//! Facts about the spiral system: approach time and winding of the inward
//! spiral, and the collar treatment used by the grid oracle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::examples::{spiral_system, spiral_target};
use super::hjb::{hjb_value_iteration_with, GridValueTable, HjbConfig};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiralFacts {
    pub rho_bar: f64,
    pub d_tol: f64,
    /// First time with `|z(t)| - 1 < d_tol`.
    pub approach_time: f64,
    /// `ln rho_bar`, the limit of `approach_time` as `d_tol -> 0`.
    pub limit_time: f64,
    /// `|theta(t) - theta_bar|` at the approach time, in radians.
    pub winding: f64,
    pub turns: f64,
    pub steps: usize,
}

/// Integrates `rho' = -rho`, `theta' = -1/(rho - 1)` (the control
/// `alpha = 1`) from `rho_bar` until `rho - 1 < d_tol`.
pub fn spiral_facts(rho_bar: f64, d_tol: f64) -> Result<SpiralFacts> {
    if !(rho_bar > 1.0 && rho_bar < 4.0) {
        return Err(Error::Config(format!("rho_bar = {rho_bar} must lie in ]1, 4[")));
    }
    if !(d_tol > 0.0) {
        return Err(Error::Config("d_tol must be positive".into()));
    }
    let rhs = |y: [f64; 2]| [-y[0], -1.0 / (y[0] - 1.0)];
    let step = |y: [f64; 2], h: f64| {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    let mut y = [rho_bar, 0.0];
    let mut t = 0.0;
    let mut steps = 0;
    if rho_bar - 1.0 >= d_tol {
        loop {
            // at most ~0.01 rad and 1% of the remaining gap per step
            let h = (0.01 * (y[0] - 1.0)).min(1e-3);
            let next = step(y, h);
            steps += 1;
            if next[0] - 1.0 < d_tol {
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if step(y, mid)[0] - 1.0 < d_tol {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                y = step(y, hi);
                t += hi;
                break;
            }
            y = next;
            t += h;
        }
    }
    Ok(SpiralFacts {
        rho_bar,
        d_tol,
        approach_time: t,
        limit_time: rho_bar.ln(),
        winding: y[1].abs(),
        turns: y[1].abs() / TAU,
        steps,
    })
}

/// Cost `k int_1^rho (r - 1)^2 / r dr` of the radial descent `rho' = -rho`
/// from `rho <= 2` to the inner circle.
pub fn collar_continuation(rho: f64, k: f64) -> f64 {
    k * (0.5 * rho * rho - 2.0 * rho + rho.ln() + 1.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiralOracle {
    pub collar: f64,
    /// Continuation value prescribed on the collar's outer edge.
    pub collar_value: f64,
    pub table: GridValueTable,
}

/// Grid oracle on `[-4, 4]^2`; nodes with `1 < |z| < 1 + collar` get the
/// continuation value of the collar's outer edge.
pub fn spiral_oracle(k: f64, spacing: f64, collar: f64, config: &HjbConfig) -> Result<SpiralOracle> {
    if !(collar > 0.0 && collar < 1.0) {
        return Err(Error::Config(format!("collar = {collar} must lie in ]0, 1[")));
    }
    let grid = UniformGrid::with_spacing(vec![-4.0, -4.0], vec![4.0, 4.0], spacing)?;
    let edge = collar_continuation(1.0 + collar, k);
    let fixed = move |z: &[f64]| {
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        (r > 1.0 && r < 1.0 + collar).then_some(edge)
    };
    let table = hjb_value_iteration_with(&spiral_system(k), &spiral_target(), &grid, config, &fixed)?;
    Ok(SpiralOracle {
        collar,
        collar_value: edge,
        table,
    })
}
