//! Built-in example systems and their analytic candidates.

use std::sync::Arc;

use serde::Serialize;

use crate::lyapunov::{CandidateMrf, RateFunction, SmoothPiece};
use crate::numerics::norm;
use crate::system::{ControlSystem, TargetSet};

/// `x' = a M1 |x|^r`, `l = M2 |x|^s`, `a in {-1, 1}`, target `{0}`.
///
/// The weights are taken constant (`psi1 = M1`, `psi2 = M2`).
pub fn power_law_system(r: f64, s: f64, m1: f64, m2: f64) -> ControlSystem {
    ControlSystem::new(
        1,
        vec![vec![-1.0], vec![1.0]],
        move |x: &[f64], a: &[f64]| vec![a[0] * m1 * x[0].abs().powf(r)],
        move |x: &[f64], _: &[f64]| m2 * x[0].abs().powf(s),
    )
}

/// Unit-speed minimum time: `x' = a`, `l = 1`.
pub fn min_time_system() -> ControlSystem {
    power_law_system(0.0, 0.0, 1.0, 1.0)
}

/// Exponent `q = s - r + 1` of the power-law candidate.
pub fn power_law_exponent(r: f64, s: f64) -> f64 {
    s - r + 1.0
}

/// The candidate `M2 / (M1 q) |x|^q`; at `q = 0` its logarithmic limit
/// `(M2 / M1) ln|x|`. Only `q > 0` gives a positive definite function.
pub fn power_law_mrf(r: f64, s: f64, m1: f64, m2: f64, p0_bar: f64) -> CandidateMrf {
    let q = power_law_exponent(r, s);
    let c = m2 / m1;
    let value = move |x: &[f64]| {
        let ax = x[0].abs();
        if q == 0.0 {
            c * ax.ln()
        } else {
            c / q * ax.powf(q)
        }
    };
    let gradient = move |x: &[f64]| vec![c * x[0].signum() * x[0].abs().powf(q - 1.0)];
    CandidateMrf::smooth(format!("power_law(q={q})"), value, gradient, p0_bar)
}

/// `U(x) = |x|` for the minimum-time system.
pub fn min_time_mrf(p0_bar: f64) -> CandidateMrf {
    power_law_mrf(0.0, 0.0, 1.0, 1.0, p0_bar)
}

fn spiral_lagrangian(rho: f64, k: f64) -> f64 {
    if rho <= 1.0 || rho > 4.0 {
        0.0
    } else if rho <= 2.0 {
        (rho - 1.0).powi(2) * k
    } else if rho <= 3.0 {
        (3.0 - rho).powi(2) * k
    } else {
        0.0
    }
}

/// Planar spiral system: `z' = M z / (|z| - 1) - alpha z`, `alpha in {-1, 1}`,
/// `M` the clockwise quarter rotation, running cost weighted by constant `k`.
pub fn spiral_system(k: f64) -> ControlSystem {
    ControlSystem::new(
        2,
        vec![vec![-1.0], vec![1.0]],
        |z: &[f64], a: &[f64]| {
            let rho = norm(z);
            let w = 1.0 / (rho - 1.0);
            vec![z[1] * w - a[0] * z[0], -z[0] * w - a[0] * z[1]]
        },
        move |z: &[f64], _: &[f64]| spiral_lagrangian(norm(z), k),
    )
}

/// Target of the spiral system: `{|z| <= 1} U {|z| >= 4}`.
pub fn spiral_target() -> TargetSet {
    TargetSet::annulus_complement(1.0, 4.0)
}

const REGION_SLACK: f64 = 1e-9;

fn radial(scale: impl Fn(f64) -> f64 + Send + Sync + 'static) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync {
    move |z: &[f64]| {
        let rho = norm(z);
        let s = scale(rho) / rho;
        z.iter().map(|v| v * s).collect()
    }
}

fn spiral_value(rho: f64, eps: f64) -> f64 {
    if rho <= 1.0 || rho >= 4.0 {
        0.0
    } else if rho <= 2.0 {
        2.0 * eps + (rho - 1.0).powi(3) / 3.0
    } else if rho <= 3.0 {
        eps * (4.0 - rho) + (3.0 - rho).powi(3) / 3.0
    } else {
        eps * (4.0 - rho)
    }
}

/// The three-piece candidate `U_eps` of the spiral system; not smooth on the
/// ring `|z| = 2` where it attains its maximum `2 eps + 1/3`.
pub fn spiral_mrf(eps: f64, p0_bar: f64) -> CandidateMrf {
    let inner = SmoothPiece::new(
        |z: &[f64]| (1.0 - REGION_SLACK..=2.0 + REGION_SLACK).contains(&norm(z)),
        move |z: &[f64]| 2.0 * eps + (norm(z) - 1.0).powi(3) / 3.0,
        radial(|r| (r - 1.0).powi(2)),
    );
    let middle = SmoothPiece::new(
        |z: &[f64]| (2.0 - REGION_SLACK..=3.0 + REGION_SLACK).contains(&norm(z)),
        move |z: &[f64]| {
            let r = norm(z);
            eps * (4.0 - r) + (3.0 - r).powi(3) / 3.0
        },
        radial(move |r| -eps - (3.0 - r).powi(2)),
    );
    let outer = SmoothPiece::new(
        |z: &[f64]| (3.0 - REGION_SLACK..=4.0 + REGION_SLACK).contains(&norm(z)),
        move |z: &[f64]| eps * (4.0 - norm(z)),
        radial(move |_| -eps),
    );
    CandidateMrf::new(
        format!("spiral_u(eps={eps})"),
        move |z: &[f64]| spiral_value(norm(z), eps),
        vec![inner, middle, outer],
        p0_bar,
    )
}

/// Rate of the weak Petrov demo on the minimum-time system: `mu = sqrt`.
pub fn petrov_demo_rate() -> RateFunction {
    Arc::new(|r: f64| r.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleSpec {
    pub key: &'static str,
    pub summary: &'static str,
    pub state_dim: usize,
    pub parameters: Vec<(&'static str, f64)>,
    pub facts: Vec<&'static str>,
}

/// Registry of the built-in examples with their default parameters.
pub fn registry() -> Vec<ExampleSpec> {
    vec![
        ExampleSpec {
            key: "minimum_time_1d",
            summary: "x' = a, l = 1, a in {-1, 1}, target {0}; candidate U = |x|",
            state_dim: 1,
            parameters: vec![("p0_bar", 0.9)],
            facts: vec!["value function V(x) = |x|", "V <= U / p0_bar for p0_bar in ]0, 1]"],
        },
        ExampleSpec {
            key: "power_law",
            summary: "x' = a M1 |x|^r, l = M2 |x|^s; candidate M2/(M1 q) |x|^q with q = s - r + 1",
            state_dim: 1,
            parameters: vec![("r", 0.0), ("s", 1.0), ("m1", 1.0), ("m2", 1.0), ("p0_bar", 0.9)],
            facts: vec![
                "candidate certified for q > 0 and p0_bar in ]0, 1[",
                "for q <= 0 no nonsingular candidate is positive definite",
                "with M1 = M2 = 1: V(x) = |x|^q / q",
            ],
        },
        ExampleSpec {
            key: "spiral",
            summary: "z' = M z/(|z| - 1) - alpha z on 1 < |z| < 4; candidate U_eps",
            state_dim: 2,
            parameters: vec![("k", 1.0), ("epsilon", 0.5), ("p0_bar", 1.0)],
            facts: vec![
                "with alpha = 1 the inner circle is approached at time ln(rho) but never reached",
                "V <= U_0, hence V = 0 on 3 <= |z| <= 4",
            ],
        },
        ExampleSpec {
            key: "petrov_demo",
            summary: "x' = a, l = 1 with the weak Petrov rate mu(r) = sqrt(r)",
            state_dim: 1,
            parameters: vec![("delta", 1.0), ("p0_bar", 0.5)],
            facts: vec!["Phi(r) = 2 sqrt(r) induces a candidate with H <= -(1 - p0_bar)"],
        },
    ]
}

pub fn lookup(key: &str) -> Option<ExampleSpec> {
    registry().into_iter().find(|e| e.key == key)
}
