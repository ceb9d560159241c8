//! Level-by-level concatenation of legs `mu_{k-1} -> mu_k`, `mu_k = nu_k U(x)`.

use serde::{Deserialize, Serialize};

use super::config::SynthesisConfig;
use super::leg::{integrate_leg, LegEnd, LegResult};
use super::reparam::{reparam_to_time, TimedLeg};
use crate::error::{Error, Result};
use crate::lyapunov::{CandidateMrf, DecreaseModulus};
use crate::system::{ControlSystem, TargetSet, Trajectory, TrajectoryNode, TrajectoryStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub level: usize,
    pub leg: LegResult,
    pub timed: TimedLeg,
    pub s_offset: f64,
    pub t_offset: f64,
    pub cost_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub start: Vec<f64>,
    pub start_level: f64,
    pub start_distance: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub p0_bar: f64,
    /// Levels `mu_0 = U(x) > mu_1 > ...` that were attempted.
    pub levels: Vec<f64>,
    pub legs: Vec<LegRecord>,
    pub trajectory: Trajectory,
    pub cost: f64,
    /// `(eps + 1) U(x) / p0_bar`; infinite when `p0_bar = 0`.
    pub cost_bound: f64,
    pub final_level: f64,
    pub final_distance: f64,
}

impl Synthesis {
    pub fn status(&self) -> TrajectoryStatus {
        self.trajectory.status
    }

    pub fn levels_completed(&self) -> usize {
        self.legs.iter().filter(|l| l.leg.end == LegEnd::ReachedLevel).count()
    }
}

/// Builds a trajectory from `x` by descending the levels `nu_k U(x)` until
/// `max_levels` legs are done or the target is within `d_tol`.
pub fn synthesize(
    system: &ControlSystem,
    target: &TargetSet,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    x: &[f64],
    sigma: f64,
    config: &SynthesisConfig,
) -> Result<Synthesis> {
    config.validate()?;
    if x.len() != system.state_dim() {
        return Err(Error::Config(format!(
            "initial state has dimension {}, system has {}",
            x.len(),
            system.state_dim()
        )));
    }
    let u0 = mrf.value(x);
    let d0 = target.distance(x);
    let p0 = mrf.p0_bar();
    let cost_bound = if p0 > 0.0 {
        (config.epsilon + 1.0) * u0.max(0.0) / p0
    } else {
        f64::INFINITY
    };
    let mut out = Synthesis {
        start: x.to_vec(),
        start_level: u0,
        start_distance: d0,
        sigma,
        epsilon: config.epsilon,
        p0_bar: p0,
        levels: vec![u0],
        legs: Vec::new(),
        trajectory: Trajectory {
            nodes: Vec::new(),
            status: TrajectoryStatus::ApproachedTarget,
        },
        cost: 0.0,
        cost_bound,
        final_level: u0,
        final_distance: d0,
    };
    if target.contains(x) || u0 <= 0.0 {
        return Ok(out);
    }
    if !(u0 < sigma) {
        return Err(Error::OutOfBand {
            x: x.to_vec(),
            value: u0,
            sigma,
        });
    }

    let mut status = TrajectoryStatus::Truncated;
    let mut current = x.to_vec();
    let (mut s_off, mut t_off, mut c_off) = (0.0, 0.0, 0.0);
    for k in 1..=config.max_levels {
        let mu_bar = config.nu(k - 1) * u0;
        let mu_hat = config.nu(k) * u0;
        out.levels.push(mu_hat);
        let leg = integrate_leg(system, target, mrf, modulus, &current, mu_bar, mu_hat, sigma, config)?;
        let timed = reparam_to_time(&leg, system, mrf, modulus)?;
        current = leg.end_state().to_vec();
        let end = leg.end;
        let record = LegRecord {
            level: k,
            s_offset: s_off,
            t_offset: t_off,
            cost_offset: c_off,
            leg,
            timed,
        };
        s_off += record.leg.s_bar();
        t_off += record.timed.duration();
        c_off += record.timed.total_cost();
        out.legs.push(record);
        if end == LegEnd::ApproachedTarget {
            status = TrajectoryStatus::ApproachedTarget;
            break;
        }
    }

    let mut nodes: Vec<TrajectoryNode> = Vec::new();
    for rec in &out.legs {
        let samples = &rec.leg.samples;
        for (i, sample) in samples.iter().enumerate() {
            if i == 0 && !nodes.is_empty() {
                continue;
            }
            nodes.push(TrajectoryNode {
                t: rec.t_offset + rec.timed.t[i],
                s: rec.s_offset + sample.s,
                x: sample.x.clone(),
                control: None,
                cost: rec.cost_offset + rec.timed.cost[i],
            });
        }
    }
    // control applied on the interval that starts at each node
    let mut controls = out
        .legs
        .iter()
        .flat_map(|rec| rec.leg.samples[1..].iter().map(|s| rec.leg.controls[s.step]));
    let n = nodes.len();
    for node in nodes.iter_mut().take(n.saturating_sub(1)) {
        node.control = controls.next();
    }
    out.cost = c_off;
    out.final_level = mrf.value(&current);
    out.final_distance = target.distance(&current);
    out.trajectory = Trajectory { nodes, status };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::{build_decrease_modulus, ModulusParams};
    use crate::oracle::examples::{min_time_mrf, min_time_system};

    fn setup() -> (ControlSystem, TargetSet, CandidateMrf, DecreaseModulus) {
        let m = build_decrease_modulus(&[(1e-6, 0.1), (2.0, 0.1)], &ModulusParams::default()).unwrap();
        (min_time_system(), TargetSet::point(vec![0.0]), min_time_mrf(0.9), m)
    }

    #[test]
    fn min_time_cost_bound() {
        let (sys, target, mrf, m) = setup();
        let cfg = SynthesisConfig::default();
        let out = synthesize(&sys, &target, &mrf, &m, &[1.0], 2.0, &cfg).unwrap();
        assert!(out.cost <= 1.1 / 0.9);
        assert!((out.cost - 1.0).abs() < 0.1);
        assert_eq!(out.status(), TrajectoryStatus::ApproachedTarget);
        out.trajectory.check_invariants().unwrap();
        let controls: Vec<_> = out.trajectory.nodes.iter().filter_map(|n| n.control).collect();
        assert_eq!(controls.len(), out.trajectory.nodes.len() - 1);
    }

    #[test]
    fn start_on_target_is_empty() {
        let (sys, target, mrf, m) = setup();
        let out = synthesize(&sys, &target, &mrf, &m, &[0.0], 2.0, &SynthesisConfig::default()).unwrap();
        assert!(out.trajectory.nodes.is_empty());
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn truncation_after_k_levels() {
        let (sys, target, mrf, m) = setup();
        let cfg = SynthesisConfig {
            max_levels: 3,
            ..Default::default()
        };
        let out = synthesize(&sys, &target, &mrf, &m, &[-1.5], 2.0, &cfg).unwrap();
        assert_eq!(out.status(), TrajectoryStatus::Truncated);
        assert_eq!(out.levels_completed(), 3);
        assert!((out.final_level - 1.5 / 8.0).abs() < 1e-8);
    }
}
