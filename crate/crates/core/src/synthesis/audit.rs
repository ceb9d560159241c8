//! Post-hoc checks of a synthesized trajectory against the inequalities the
//! construction is supposed to guarantee.

use serde::{Deserialize, Serialize};

use super::config::SynthesisConfig;
use super::leg::{reparameterized_field, roundoff, LegEnd};
use super::synthesize::{LegRecord, Synthesis};
use crate::error::Result;
use crate::lyapunov::{CandidateMrf, DecreaseModulus};
use crate::numerics::norm;
use crate::system::ControlSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest violation `lhs - rhs` seen (non-positive when passing).
    pub worst: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, worst: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: worst <= 0.0,
            worst,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegAudit {
    pub level: usize,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisAudit {
    pub legs: Vec<LegAudit>,
    pub global: Vec<Check>,
}

impl SynthesisAudit {
    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.legs
            .iter()
            .flat_map(|l| l.checks.iter())
            .chain(self.global.iter())
            .filter(|c| !c.passed)
    }

    /// All checks with the given name, over every leg.
    pub fn by_name<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.legs
            .iter()
            .flat_map(|l| l.checks.iter())
            .chain(self.global.iter())
            .filter(move |c| c.name == name)
    }
}

pub fn audit_synthesis(
    out: &Synthesis,
    system: &ControlSystem,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    config: &SynthesisConfig,
) -> Result<SynthesisAudit> {
    let legs = out
        .legs
        .iter()
        .map(|rec| audit_leg(rec, system, mrf, modulus, config))
        .collect::<Result<Vec<_>>>()?;

    let mut global = Vec::new();
    global.push(Check::new(
        "cost_bound",
        out.cost - out.cost_bound,
        format!("cost {} vs bound {}", out.cost, out.cost_bound),
    ));
    let u_max = out
        .trajectory
        .nodes
        .iter()
        .map(|n| mrf.value(&n.x))
        .fold(f64::NEG_INFINITY, f64::max);
    global.push(Check::new(
        "level_never_exceeds_start",
        if out.trajectory.nodes.is_empty() {
            0.0
        } else {
            u_max - out.start_level - roundoff(out.start_level)
        },
        format!("max U {u_max} vs U(x) {}", out.start_level),
    ));
    let inv = out.trajectory.check_invariants();
    global.push(Check {
        name: "trajectory_invariants".into(),
        passed: inv.is_ok(),
        worst: if inv.is_ok() { 0.0 } else { 1.0 },
        detail: inv.err().unwrap_or_default(),
    });
    Ok(SynthesisAudit { legs, global })
}

fn audit_leg(
    rec: &LegRecord,
    system: &ControlSystem,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    config: &SynthesisConfig,
) -> Result<LegAudit> {
    let leg = &rec.leg;
    let timed = &rec.timed;
    let kappa = 1.0 / (leg.epsilon + 1.0);
    let u_start = leg.samples[0].u;
    let u_end = leg.end_level();
    let s_bar = leg.s_bar();
    let n = leg.controls.len();
    let mut checks = Vec::new();

    // U(zeta(s)) - U(x^j) <= -(s - s_j)/(eps+1) on every substep
    let mut worst = f64::NEG_INFINITY;
    for (i, sample) in leg.samples.iter().enumerate().skip(1) {
        let anchor = leg.anchor(leg.owning_step(i));
        let v = sample.u - anchor.u + (sample.s - anchor.s) * kappa - roundoff(anchor.u);
        worst = worst.max(v);
    }
    if leg.samples.len() == 1 {
        worst = 0.0;
    }
    checks.push(Check::new(
        "per_step_decrease",
        worst,
        format!("{} samples", leg.samples.len()),
    ));

    // s_bar <= (eps+1)(U_start - U_end); t_bar <= s_bar / m(U_end)
    let upper = s_bar - (leg.epsilon + 1.0) * (u_start - u_end) - n as f64 * roundoff(u_start);
    checks.push(Check::new("leg_length", upper, format!("s_bar = {s_bar}")));
    let m_end = modulus.eval(u_end);
    let t_bar = timed.duration();
    let t_excess = if m_end > 0.0 {
        t_bar - s_bar / m_end - timed.quadrature_error
    } else {
        0.0
    };
    checks.push(Check::new(
        "leg_duration",
        t_excess.max(if leg.end == LegEnd::Empty || t_bar > 0.0 {
            f64::NEG_INFINITY
        } else {
            1.0
        }),
        format!("t_bar = {t_bar}, s_bar / m(U_end) = {}", s_bar / m_end),
    ));

    let pts = leg.partition.points();
    let mono = pts.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let shape = if pts.len() == n + 1 { 0.0 } else { 1.0 };
    checks.push(Check::new(
        "partition_monotone",
        if n == 0 { shape } else { mono.max(shape) },
        format!("{} steps, diameter {}", n, leg.partition.diameter()),
    ));

    // sum over steps telescopes to U_end - U_start <= -s_bar/(eps+1)
    let tele = u_end - u_start + s_bar * kappa - (n.max(1)) as f64 * roundoff(u_start);
    checks.push(Check::new(
        "telescoped_descent",
        tele,
        format!("U {u_start} -> {u_end}"),
    ));

    // p0_bar int l dt + int m(U) dt = s_bar <= (eps+1)(U_start - U_end)
    let lhs = mrf.p0_bar() * timed.total_cost() + *timed.m_integral.last().unwrap_or(&0.0);
    let tol = 10.0 * timed.quadrature_error + n as f64 * roundoff(u_start);
    checks.push(Check::new(
        "cost_inequality",
        lhs - (leg.epsilon + 1.0) * (u_start - u_end) - tol,
        format!("p0 cost + int m = {lhs}, tol {tol}"),
    ));

    let attain = match leg.end {
        LegEnd::ReachedLevel => (u_end - leg.mu_hat).abs() - leg.level_tol - roundoff(leg.mu_hat),
        LegEnd::ApproachedTarget => 0.0,
        LegEnd::Empty => 0.0,
    };
    checks.push(Check::new(
        "level_attained",
        attain,
        format!("{:?} at U = {u_end}", leg.end),
    ));

    let tau = timed
        .t
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "time_monotone",
        if timed.t.len() < 2 { 0.0 } else { tau },
        format!("{} nodes", timed.t.len()),
    ));

    // Hermite derivative at the midpoint against the field there
    let mut res = 0.0f64;
    for i in 1..leg.samples.len() {
        let (sa, sb) = (&leg.samples[i - 1], &leg.samples[i]);
        let a = leg.controls[sb.step];
        let h = sb.s - sa.s;
        if !(h > 0.0) {
            continue;
        }
        let fa = reparameterized_field(system, mrf, modulus, &sa.x, a, leg.mu_hat, leg.sigma)?;
        let fb = reparameterized_field(system, mrf, modulus, &sb.x, a, leg.mu_hat, leg.sigma)?;
        let zm = &timed.midpoints[i - 1];
        let fm = reparameterized_field(system, mrf, modulus, zm, a, leg.mu_hat, leg.sigma)?;
        let diff: Vec<f64> = (0..zm.len())
            .map(|k| 1.5 * (sb.x[k] - sa.x[k]) / h - 0.25 * (fa[k] + fb[k]) - fm[k])
            .collect();
        res = res.max(norm(&diff) / norm(&fm).max(1e-300));
    }
    checks.push(Check::new(
        "ode_residual",
        res - config.residual_tol,
        format!("max relative residual {res:e}"),
    ));

    let bound = ((leg.epsilon + 1.0) * (leg.mu_bar - leg.mu_hat) / leg.delta_final).ceil() + 1.0;
    checks.push(Check::new(
        "step_count",
        if n == 0 { 0.0 } else { n as f64 - bound },
        format!("{n} steps, bound {bound}"),
    ));

    Ok(LegAudit {
        level: rec.level,
        checks,
    })
}
