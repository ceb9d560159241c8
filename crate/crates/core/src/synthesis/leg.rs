//! One leg of the construction: from `U = mu_bar` down to `U = mu_hat`
//! with piecewise-constant feedback in the reparameterized variable `s`.

use serde::{Deserialize, Serialize};

use super::config::SynthesisConfig;
use super::feedback::{denominator, feedback_select};
use crate::error::{Error, Result};
use crate::lyapunov::{CandidateMrf, DecreaseModulus};
use crate::numerics::{norm, rk4_step, smoothstep};
use crate::system::{ControlSystem, Partition, TargetSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegEnd {
    /// `U` dropped to `mu_hat` within the level tolerance.
    ReachedLevel,
    /// `d` dropped below `d_tol` first.
    ApproachedTarget,
    /// Nothing to descend.
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegSample {
    /// Offset from the leg start.
    pub s: f64,
    pub x: Vec<f64>,
    pub u: f64,
    /// Step whose control drives the interval ending here (0 for the first sample).
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegResult {
    pub start: Vec<f64>,
    pub mu_bar: f64,
    pub mu_hat: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub level_tol: f64,
    /// RK4 substep states; anchors are listed in `step_starts`.
    pub samples: Vec<LegSample>,
    pub step_starts: Vec<usize>,
    pub controls: Vec<usize>,
    pub partition: Partition,
    pub end: LegEnd,
    pub delta_initial: f64,
    pub delta_final: f64,
    pub halvings: usize,
    pub refinements: usize,
}

impl LegResult {
    /// `s_bar`, the leg length in `s`.
    pub fn s_bar(&self) -> f64 {
        self.partition.end()
    }

    pub fn end_state(&self) -> &[f64] {
        &self.samples.last().expect("legs hold their start").x
    }

    pub fn end_level(&self) -> f64 {
        self.samples.last().expect("legs hold their start").u
    }

    pub fn anchor(&self, j: usize) -> &LegSample {
        &self.samples[self.step_starts[j]]
    }

    /// Step index `j` of sample `i` for the per-step decrease: the anchor of
    /// the interval that ends at sample `i`.
    pub fn owning_step(&self, i: usize) -> usize {
        self.samples[i].step
    }
}

/// Cut-off equal to 1 on `U in [mu_hat/2, sigma]` and 0 outside
/// `[mu_hat/4, sigma + 1]`, smoothstep in between.
pub fn cutoff(u: f64, mu_hat: f64, sigma: f64) -> f64 {
    if u < 0.5 * mu_hat {
        smoothstep((u - 0.25 * mu_hat) / (0.25 * mu_hat))
    } else if u > sigma {
        smoothstep(sigma + 1.0 - u)
    } else {
        1.0
    }
}

/// `psi(z) f(z, a) / g(z, a)`.
#[allow(clippy::too_many_arguments)]
pub fn reparameterized_field(
    system: &ControlSystem,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    z: &[f64],
    a: usize,
    mu_hat: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    let psi = cutoff(mrf.value(z), mu_hat, sigma);
    if psi == 0.0 {
        return Ok(vec![0.0; z.len()]);
    }
    let g = denominator(system, mrf, modulus, z, a)?;
    Ok(system.eval_dynamics(z, a)?.into_iter().map(|v| psi * v / g).collect())
}

/// Tiny allowance for rounding in `U` when checking the per-step decrease.
pub(crate) fn roundoff(u: f64) -> f64 {
    8.0 * f64::EPSILON * u.abs()
}

struct Ctx<'a> {
    system: &'a ControlSystem,
    target: &'a TargetSet,
    mrf: &'a CandidateMrf,
    modulus: &'a DecreaseModulus,
    mu_hat: f64,
    sigma: f64,
}

impl Ctx<'_> {
    fn step(&self, z: &[f64], a: usize, h: f64) -> Result<Vec<f64>> {
        let rhs = |y: &[f64]| reparameterized_field(self.system, self.mrf, self.modulus, y, a, self.mu_hat, self.sigma);
        rk4_step(&rhs, z, h)
    }
}

enum StepOutcome {
    Continue,
    Done(LegEnd),
}

/// Integrates one leg from `x` (with `U(x) = mu_bar`) until `U = mu_hat`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_leg(
    system: &ControlSystem,
    target: &TargetSet,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    x: &[f64],
    mu_bar: f64,
    mu_hat: f64,
    sigma: f64,
    config: &SynthesisConfig,
) -> Result<LegResult> {
    config.validate()?;
    let u0 = mrf.value(x);
    if !(mu_hat > 0.0) {
        return Err(Error::Config(format!(
            "target level mu_hat = {mu_hat} must be positive"
        )));
    }
    if mu_bar > sigma {
        return Err(Error::OutOfBand {
            x: x.to_vec(),
            value: mu_bar,
            sigma,
        });
    }
    let start_tol = 2.0 * config.level_tol_rel * mu_bar + roundoff(mu_bar);
    if (u0 - mu_bar).abs() > start_tol {
        return Err(Error::Config(format!(
            "leg start has U = {u0}, expected mu_bar = {mu_bar}"
        )));
    }
    let level_tol = config.level_tol_rel * mu_hat;
    let first = LegSample {
        s: 0.0,
        x: x.to_vec(),
        u: u0,
        step: 0,
    };
    let mut leg = LegResult {
        start: x.to_vec(),
        mu_bar,
        mu_hat,
        sigma,
        epsilon: config.epsilon,
        level_tol,
        samples: vec![first],
        step_starts: Vec::new(),
        controls: Vec::new(),
        partition: Partition::new(vec![0.0])?,
        end: LegEnd::Empty,
        delta_initial: 0.0,
        delta_final: 0.0,
        halvings: 0,
        refinements: 0,
    };
    if mu_hat >= mu_bar || u0 <= mu_hat {
        return Ok(leg);
    }

    let ctx = Ctx {
        system,
        target,
        mrf,
        modulus,
        mu_hat,
        sigma,
    };
    let kappa = 1.0 / (config.epsilon + 1.0);
    let first_choice = feedback_select(system, mrf, modulus, x)?;
    let speed = norm(&system.eval_dynamics(x, first_choice.control)?);
    let radius = (u0 - 0.5 * mu_hat) / norm(&first_choice.p).max(f64::MIN_POSITIVE);
    let delta1 = if speed > 0.0 {
        radius * first_choice.g / speed
    } else {
        f64::INFINITY
    };
    let mut delta = config.delta_init.min(0.5 * mu_hat).min(delta1);
    leg.delta_initial = delta;
    let min_step = config.min_step();

    loop {
        if leg.controls.len() >= config.max_steps_per_leg {
            let last = leg.samples.last().unwrap();
            return Err(Error::StepCollapse {
                x: last.x.clone(),
                value: last.u,
                min_step: delta,
            });
        }
        let anchor_index = leg.samples.len() - 1;
        let anchor = leg.samples[anchor_index].clone();
        let j = leg.controls.len();
        let a = if j == 0 {
            first_choice.control
        } else {
            feedback_select(system, mrf, modulus, &anchor.x)?.control
        };

        let (pending, outcome) = loop {
            match try_step(&ctx, &anchor, a, j, delta, kappa, level_tol, config)? {
                Some(done) => break done,
                None => {
                    delta *= 0.5;
                    leg.halvings += 1;
                    if delta < min_step {
                        return Err(Error::StepCollapse {
                            x: anchor.x.clone(),
                            value: anchor.u,
                            min_step,
                        });
                    }
                }
            }
        };
        let mut pending = pending;
        if matches!(outcome, StepOutcome::Continue) {
            // cut the step at the first substep already at its end level
            let u_end = pending.last().unwrap().u;
            if let Some(k) = pending.iter().position(|p| p.u <= u_end) {
                if k + 1 < pending.len() {
                    pending.truncate(k + 1);
                    leg.refinements += 1;
                }
            }
        }
        leg.step_starts.push(anchor_index);
        leg.controls.push(a);
        leg.samples.extend(pending);
        if let StepOutcome::Done(end) = outcome {
            leg.end = end;
            break;
        }
    }
    leg.delta_final = delta;
    let mut points: Vec<f64> = leg.step_starts.iter().map(|&i| leg.samples[i].s).collect();
    points.push(leg.samples.last().unwrap().s);
    leg.partition = Partition::new(points)?;
    Ok(leg)
}

/// Integrates one step of length `delta`; `None` when the per-step decrease
/// fails at some substep.
#[allow(clippy::too_many_arguments)]
fn try_step(
    ctx: &Ctx<'_>,
    anchor: &LegSample,
    a: usize,
    j: usize,
    delta: f64,
    kappa: f64,
    level_tol: f64,
    config: &SynthesisConfig,
) -> Result<Option<(Vec<LegSample>, StepOutcome)>> {
    let h = delta / config.substeps as f64;
    let slack = roundoff(anchor.u);
    let decreases = |u: f64, ds: f64| u - anchor.u <= -ds * kappa + slack;
    let mut pending = Vec::with_capacity(config.substeps);
    let mut z = anchor.x.clone();
    for k in 1..=config.substeps {
        let z_new = ctx.step(&z, a, h)?;
        let u_new = ctx.mrf.value(&z_new);
        let ds = k as f64 * h;
        if !decreases(u_new, ds) {
            return Ok(None);
        }
        if u_new <= ctx.mu_hat {
            let (theta, z_c, u_c) = bisect_level(ctx, &z, a, h, level_tol)?;
            let ds_c = (k - 1) as f64 * h + theta * h;
            if !decreases(u_c, ds_c) {
                return Ok(None);
            }
            pending.push(LegSample {
                s: anchor.s + ds_c,
                x: z_c,
                u: u_c,
                step: j,
            });
            return Ok(Some((pending, StepOutcome::Done(LegEnd::ReachedLevel))));
        }
        let near = ctx.target.distance(&z_new) < config.d_tol;
        pending.push(LegSample {
            s: anchor.s + ds,
            x: z_new.clone(),
            u: u_new,
            step: j,
        });
        if near {
            return Ok(Some((pending, StepOutcome::Done(LegEnd::ApproachedTarget))));
        }
        z = z_new;
    }
    Ok(Some((pending, StepOutcome::Continue)))
}

/// Bisection on the substep fraction `theta` for `U(zeta) = mu_hat`.
fn bisect_level(ctx: &Ctx<'_>, z: &[f64], a: usize, h: f64, level_tol: f64) -> Result<(f64, Vec<f64>, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (1.0, ctx.step(z, a, h)?, f64::NAN);
    best.2 = ctx.mrf.value(&best.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let zm = ctx.step(z, a, mid * h)?;
        let um = ctx.mrf.value(&zm);
        if um <= ctx.mu_hat {
            hi = mid;
            best = (mid, zm, um);
        } else {
            lo = mid;
        }
        if (um - ctx.mu_hat).abs() <= level_tol {
            return Ok((mid, ctx.step(z, a, mid * h)?, um));
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::{build_decrease_modulus, ModulusParams};
    use crate::oracle::examples::{min_time_mrf, min_time_system};

    fn min_time_modulus() -> DecreaseModulus {
        // H = p0_bar - 1 on every band; m_hat = 0.5 for p0_bar = 0.5
        let samples: Vec<(f64, f64)> = (0..30).map(|i| (2.0 * 0.6f64.powi(i), 0.5)).collect();
        build_decrease_modulus(&samples, &ModulusParams::default()).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.5, 1.0, 2.0), 1.0);
        assert_eq!(cutoff(2.0, 1.0, 2.0), 1.0);
        assert_eq!(cutoff(0.2, 1.0, 2.0), 0.0);
        assert_eq!(cutoff(3.5, 1.0, 2.0), 0.0);
        assert!(cutoff(0.4, 1.0, 2.0) > 0.0 && cutoff(0.4, 1.0, 2.0) < 1.0);
    }

    #[test]
    fn min_time_leg() {
        let sys = min_time_system();
        let mrf = min_time_mrf(0.5);
        let m = min_time_modulus();
        let cfg = SynthesisConfig::default();
        let target = TargetSet::point(vec![0.0]);
        let leg = integrate_leg(&sys, &target, &mrf, &m, &[1.0], 1.0, 0.5, 2.0, &cfg).unwrap();
        assert_eq!(leg.end, LegEnd::ReachedLevel);
        assert!((leg.end_level() - 0.5).abs() <= leg.level_tol);
        assert!(leg.s_bar() <= 1.1);
        assert!(leg.s_bar() <= 1.1 * 0.5 + 1e-12);
        assert!(leg.controls.iter().all(|&a| sys.controls()[a] == vec![-1.0]));
    }

    #[test]
    fn degenerate_leg_is_empty() {
        let sys = min_time_system();
        let mrf = min_time_mrf(0.5);
        let m = min_time_modulus();
        let target = TargetSet::point(vec![0.0]);
        let leg = integrate_leg(
            &sys,
            &target,
            &mrf,
            &m,
            &[1.0],
            1.0,
            1.0,
            2.0,
            &SynthesisConfig::default(),
        )
        .unwrap();
        assert_eq!(leg.end, LegEnd::Empty);
        assert_eq!(leg.s_bar(), 0.0);
        assert_eq!(leg.samples.len(), 1);
    }

    #[test]
    fn out_of_band_start() {
        let sys = min_time_system();
        let mrf = min_time_mrf(0.5);
        let m = min_time_modulus();
        let target = TargetSet::point(vec![0.0]);
        let r = integrate_leg(
            &sys,
            &target,
            &mrf,
            &m,
            &[3.0],
            3.0,
            1.0,
            2.0,
            &SynthesisConfig::default(),
        );
        assert!(matches!(r, Err(Error::OutOfBand { .. })));
    }
}
