//! Weak Petrov condition for minimum-time problems and the induced
//! candidate `Phi(d(x))` with `Phi(r) = int_0^r 1/mu`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mrf::{CandidateMrf, SmoothPiece};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::numerics::{dot, simpson};
use crate::system::{ControlSystem, TargetSet};

pub type RateFunction = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetrovSpec {
    pub delta: f64,
    pub p0_bar: f64,
    /// Decades below `delta` covered by the integrability test.
    pub decades: usize,
    /// Simpson half-panels per decade (log variable).
    pub panels_per_decade: usize,
    /// A decade-to-decade contribution ratio above this means divergence.
    pub ratio_limit: f64,
}

impl Default for PetrovSpec {
    fn default() -> Self {
        Self {
            delta: 1.0,
            p0_bar: 0.5,
            decades: 12,
            panels_per_decade: 32,
            ratio_limit: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrability {
    /// `int` of `1/mu` over each decade `[delta 10^-k, delta 10^(1-k)]`.
    pub decade_integrals: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `Phi(delta)` including the extrapolated geometric tail.
    pub phi_delta: f64,
    pub converges: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetrovReport {
    pub delta: f64,
    pub p0_bar: f64,
    pub checked: usize,
    /// Largest `inf_a <p, f(x, a)> + mu(d(x))` over sampled `p in D*d(x)`.
    pub worst_margin: f64,
    pub worst_at: Vec<f64>,
    pub failures: usize,
    pub integrability: Option<Integrability>,
    /// Largest `H(x, p0_bar, D*(Phi o d)(x))` on the same points.
    pub induced_worst_h: Option<f64>,
    pub induced_bound: f64,
    /// `mu(0) > 0`: the classical (linear `Phi`) case.
    pub classical: bool,
}

impl PetrovReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
            && self.integrability.as_ref().is_none_or(|i| i.converges)
            && self
                .induced_worst_h
                .is_none_or(|h| h <= self.induced_bound + 1e-9 * self.induced_bound.abs().max(1.0))
    }
}

fn validate_mu(mu: &RateFunction, delta: f64) -> Result<bool> {
    let m0 = mu(0.0);
    if !(m0 >= 0.0) {
        return Err(Error::Config(format!("mu(0) = {m0} must be non-negative")));
    }
    let mut prev = m0;
    for i in 1..=256 {
        let r = delta * i as f64 / 256.0;
        let v = mu(r);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("mu({r}) = {v} must be positive")));
        }
        if v < prev * (1.0 - 1e-12) {
            return Err(Error::Config(format!("mu decreases near {r}")));
        }
        prev = v;
    }
    Ok(m0 > 0.0)
}

/// `int_a^b dr / mu(r)` in the variable `ln r`.
fn log_integral(mu: &RateFunction, a: f64, b: f64, half_panels: usize) -> f64 {
    simpson(
        |u: f64| {
            let r = u.exp();
            r / mu(r)
        },
        a.ln(),
        b.ln(),
        half_panels,
    )
}

/// Decade test for `int_0^delta dr / mu(r) < inf`: contributions of
/// successive decades towards zero must shrink geometrically.
pub fn integrability(mu: &RateFunction, spec: &PetrovSpec) -> Integrability {
    let decades = spec.decades.max(4);
    let c: Vec<f64> = (1..=decades)
        .map(|k| {
            let hi = spec.delta * 10f64.powi(1 - k as i32);
            log_integral(mu, hi / 10.0, hi, spec.panels_per_decade)
        })
        .collect();
    let ratios: Vec<f64> = c.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() - 3..];
    let converges = c.iter().all(|v| v.is_finite()) && tail.iter().all(|q| *q < spec.ratio_limit);
    let q = *ratios.last().unwrap();
    let extrapolated = if converges {
        c[decades - 1] * q / (1.0 - q)
    } else {
        f64::INFINITY
    };
    Integrability {
        phi_delta: c.iter().sum::<f64>() + extrapolated,
        decade_integrals: c,
        ratios,
        converges,
    }
}

/// `Phi(r) = int_0^r dr / mu`, extended linearly with slope `1/mu(delta)`
/// beyond `delta`.
#[derive(Clone)]
pub struct PetrovPotential {
    mu: RateFunction,
    delta: f64,
    phi_delta: f64,
    decades: usize,
    panels: usize,
}

impl PetrovPotential {
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.delta {
            return self.phi_delta + (r - self.delta) / (self.mu)(self.delta);
        }
        let lo = r * 10f64.powi(-(self.decades as i32));
        let c1 = log_integral(&self.mu, lo, 10.0 * lo, self.panels);
        let c2 = log_integral(&self.mu, 10.0 * lo, 100.0 * lo, self.panels);
        let q = c1 / c2;
        let tail = if q < 1.0 { c1 * q / (1.0 - q) } else { 0.0 };
        tail + log_integral(&self.mu, lo, r, 4 * self.panels * self.decades)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        1.0 / (self.mu)(r.min(self.delta))
    }
}

fn petrov_margins(
    system: &ControlSystem,
    target: &TargetSet,
    mu: &RateFunction,
    delta: f64,
    grid: &UniformGrid,
) -> Result<Vec<(usize, f64, Vec<Vec<f64>>)>> {
    let out: Vec<Option<(usize, f64, Vec<Vec<f64>>)>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| -> Result<Option<(usize, f64, Vec<Vec<f64>>)>> {
            let x = grid.point(flat);
            let d = target.distance(&x);
            if target.contains(&x) || d >= delta {
                return Ok(None);
            }
            for a in 0..system.control_count() {
                let l = system.eval_lagrangian(&x, a)?;
                if (l - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "the weak Petrov check needs l = 1, got {l} at x = {x:?}"
                    )));
                }
            }
            let grads = target
                .distance_gradients(&x)
                .ok_or_else(|| Error::Config(format!("target '{}' has no distance gradients", target.name())))?;
            if grads.is_empty() {
                return Err(Error::NoActivePiece { x });
            }
            let mut worst = f64::NEG_INFINITY;
            for p in &grads {
                let mut best = f64::INFINITY;
                for a in 0..system.control_count() {
                    best = best.min(dot(p, &system.eval_dynamics(&x, a)?));
                }
                worst = worst.max(best + mu(d));
            }
            Ok(Some((flat, worst, grads)))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

/// Checks `inf_a <D*d(x), f(x, a)> <= -mu(d(x))` on grid points with
/// `0 < d(x) < delta`, without the integrability requirement.
pub fn check_petrov_inequality(
    system: &ControlSystem,
    target: &TargetSet,
    mu: &RateFunction,
    delta: f64,
    grid: &UniformGrid,
) -> Result<PetrovReport> {
    let classical = validate_mu(mu, delta)?;
    let margins = petrov_margins(system, target, mu, delta, grid)?;
    let mut report = PetrovReport {
        delta,
        p0_bar: 0.0,
        checked: margins.len(),
        worst_margin: f64::NEG_INFINITY,
        worst_at: Vec::new(),
        failures: 0,
        integrability: None,
        induced_worst_h: None,
        induced_bound: 0.0,
        classical,
    };
    for (flat, m, _) in &margins {
        if *m > report.worst_margin {
            report.worst_margin = *m;
            report.worst_at = grid.point(*flat);
        }
        if *m > 1e-12 {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// Full weak Petrov check; on success also returns the induced candidate
/// `Phi o d` with the requested `p0_bar`, whose Hamiltonian is checked
/// against `-(1 - p0_bar)` on the same points.
pub fn check_weak_petrov(
    system: &ControlSystem,
    target: &TargetSet,
    mu: RateFunction,
    spec: &PetrovSpec,
    grid: &UniformGrid,
) -> Result<(PetrovReport, CandidateMrf)> {
    if !(spec.p0_bar > 0.0 && spec.p0_bar < 1.0) {
        return Err(Error::Config(format!("p0_bar = {} must lie in ]0, 1[", spec.p0_bar)));
    }
    let classical = validate_mu(&mu, spec.delta)?;
    let integ = if classical {
        let c = mu(0.0);
        Integrability {
            decade_integrals: Vec::new(),
            ratios: Vec::new(),
            phi_delta: log_integral(&mu, spec.delta * 1e-12, spec.delta, 48 * spec.panels_per_decade)
                + spec.delta * 1e-12 / c,
            converges: true,
        }
    } else {
        integrability(&mu, spec)
    };
    if !integ.converges {
        return Err(Error::Integrability {
            delta: spec.delta,
            reason: format!(
                "decade contributions {:?} do not shrink (ratios {:?})",
                &integ.decade_integrals[integ.decade_integrals.len() - 3..],
                &integ.ratios[integ.ratios.len() - 3..]
            ),
        });
    }
    let mut report = check_petrov_inequality(system, target, &mu, spec.delta, grid)?;
    report.p0_bar = spec.p0_bar;
    let potential = PetrovPotential {
        mu,
        delta: spec.delta,
        phi_delta: integ.phi_delta,
        decades: spec.decades.max(4),
        panels: spec.panels_per_decade,
    };
    report.integrability = Some(integ);
    let mrf = induced_mrf(target, potential, spec.p0_bar);
    report.induced_bound = -(1.0 - spec.p0_bar);

    let hs: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|flat| -> Result<f64> {
            let x = grid.point(flat);
            if target.contains(&x) || target.distance(&x) >= spec.delta {
                return Ok(f64::NEG_INFINITY);
            }
            let mut worst = f64::NEG_INFINITY;
            for p in mrf.limiting_gradients(&x)? {
                worst = worst.max(system.hamiltonian(&x, spec.p0_bar, &p)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    report.induced_worst_h = Some(hs.into_iter().fold(f64::NEG_INFINITY, f64::max));
    Ok((report, mrf))
}

const MAX_DISTANCE_GRADIENTS: usize = 4;

/// `U = Phi o d` with `D*U(x) = Phi'(d(x)) D*d(x)`: piece `i` carries the
/// `i`-th limiting gradient of `d` and is active wherever it exists.
pub fn induced_mrf(target: &TargetSet, potential: PetrovPotential, p0_bar: f64) -> CandidateMrf {
    let value = {
        let (t, phi) = (target.clone(), potential.clone());
        move |x: &[f64]| phi.eval(t.distance(x))
    };
    let pieces = (0..MAX_DISTANCE_GRADIENTS)
        .map(|i| {
            let (tr, tv, tg) = (target.clone(), target.clone(), target.clone());
            let (pv, pg) = (potential.clone(), potential.clone());
            SmoothPiece::new(
                move |x: &[f64]| tr.distance_gradients(x).is_some_and(|g| g.len() > i),
                move |x: &[f64]| pv.eval(tv.distance(x)),
                move |x: &[f64]| {
                    let s = pg.derivative(tg.distance(x));
                    tg.distance_gradients(x).unwrap()[i].iter().map(|v| s * v).collect()
                },
            )
        })
        .collect();
    CandidateMrf::new("petrov_induced", value, pieces, p0_bar)
}
