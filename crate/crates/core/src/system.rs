//! Controlled systems, targets, the minimized Hamiltonian and trajectory data.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm};

pub type VelocityField = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type CostRate = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type CovectorSet = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// A control system `x' = f(x, a)` with running cost `l(x, a) >= 0` and a
/// finite sample of the compact control set.
#[derive(Clone)]
pub struct ControlSystem {
    state_dim: usize,
    controls: Vec<Vec<f64>>,
    dynamics: VelocityField,
    lagrangian: CostRate,
}

impl fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSystem")
            .field("state_dim", &self.state_dim)
            .field("controls", &self.controls)
            .finish_non_exhaustive()
    }
}

impl ControlSystem {
    pub fn new<F, L>(state_dim: usize, controls: Vec<Vec<f64>>, dynamics: F, lagrangian: L) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        L: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            state_dim,
            controls,
            dynamics: Arc::new(dynamics),
            lagrangian: Arc::new(lagrangian),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    fn control(&self, index: usize) -> Result<&[f64]> {
        self.controls
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::InvalidControl {
                index,
                len: self.controls.len(),
            })
    }

    pub fn eval_dynamics(&self, x: &[f64], a_index: usize) -> Result<Vec<f64>> {
        let a = self.control(a_index)?;
        let v = (self.dynamics)(x, a);
        if v.len() != self.state_dim || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::SingularDynamics { x: x.to_vec() });
        }
        Ok(v)
    }

    pub fn eval_lagrangian(&self, x: &[f64], a_index: usize) -> Result<f64> {
        let a = self.control(a_index)?;
        let v = (self.lagrangian)(x, a);
        if !v.is_finite() {
            return Err(Error::SingularDynamics { x: x.to_vec() });
        }
        if v < 0.0 {
            return Err(Error::NegativeLagrangian {
                x: x.to_vec(),
                control: a_index,
                value: v,
            });
        }
        Ok(v)
    }

    /// `p0 * l(x, a) + <p, f(x, a)>`.
    pub fn integrand(&self, x: &[f64], p0: f64, p: &[f64], a_index: usize) -> Result<f64> {
        let l = self.eval_lagrangian(x, a_index)?;
        let f = self.eval_dynamics(x, a_index)?;
        Ok(p0 * l + dot(p, &f))
    }

    /// Minimum of the integrand over the control sample together with the
    /// lowest index attaining it.
    pub fn hamiltonian_with_argmin(&self, x: &[f64], p0: f64, p: &[f64]) -> Result<(usize, f64)> {
        if self.controls.is_empty() {
            return Err(Error::Config("empty control set".into()));
        }
        if p0 < 0.0 {
            return Err(Error::Config(format!("p0 = {p0} must be non-negative")));
        }
        let mut best = (0, self.integrand(x, p0, p, 0)?);
        for a in 1..self.controls.len() {
            let v = self.integrand(x, p0, p, a)?;
            if v < best.1 {
                best = (a, v);
            }
        }
        Ok(best)
    }

    pub fn hamiltonian(&self, x: &[f64], p0: f64, p: &[f64]) -> Result<f64> {
        self.hamiltonian_with_argmin(x, p0, p).map(|(_, h)| h)
    }

    pub fn hamiltonian_argmin(&self, x: &[f64], p0: f64, p: &[f64]) -> Result<usize> {
        self.hamiltonian_with_argmin(x, p0, p).map(|(a, _)| a)
    }
}

/// Closed target given through its Euclidean distance function.
#[derive(Clone)]
pub struct TargetSet {
    name: String,
    distance: ScalarField,
    gradients: Option<CovectorSet>,
    tol: f64,
}

impl fmt::Debug for TargetSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetSet")
            .field("name", &self.name)
            .field("tol", &self.tol)
            .finish_non_exhaustive()
    }
}

impl TargetSet {
    pub fn new<D>(name: impl Into<String>, distance: D) -> Self
    where
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            distance: Arc::new(distance),
            gradients: None,
            tol: 1e-12,
        }
    }

    /// Attach the limiting gradients of the distance function.
    pub fn with_gradients<G>(mut self, gradients: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        self.gradients = Some(Arc::new(gradients));
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// The singleton `{center}`.
    pub fn point(center: Vec<f64>) -> Self {
        let c = center.clone();
        Self::new("point", move |x: &[f64]| {
            x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .with_gradients(move |x: &[f64]| {
            let diff: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            let n = norm(&diff);
            if n == 0.0 {
                return Vec::new();
            }
            vec![diff.iter().map(|v| v / n).collect()]
        })
    }

    /// `{|x| <= inner} U {|x| >= outer}`; the free region is the open annulus.
    pub fn annulus_complement(inner: f64, outer: f64) -> Self {
        Self::new("annulus_complement", move |x: &[f64]| {
            let r = norm(x);
            (r - inner).min(outer - r).max(0.0)
        })
        .with_gradients(move |x: &[f64]| {
            let r = norm(x);
            if r == 0.0 {
                return Vec::new();
            }
            let out: Vec<f64> = x.iter().map(|v| v / r).collect();
            let inward: Vec<f64> = out.iter().map(|v| -v).collect();
            let (a, b) = (r - inner, outer - r);
            if (a - b).abs() <= 1e-12 {
                vec![out, inward]
            } else if a < b {
                vec![out]
            } else {
                vec![inward]
            }
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        (self.distance)(x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) <= self.tol
    }

    pub fn distance_gradients(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.gradients.as_ref().map(|g| g(x))
    }
}

/// Strictly increasing sequence starting at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.first() != Some(&0.0) {
            return Err(Error::Config("partition must start at 0".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("partition must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn diameter(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn end(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    ReachedLevel,
    ApproachedTarget,
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNode {
    pub t: f64,
    pub s: f64,
    pub x: Vec<f64>,
    /// Control applied from this node on; `None` on the final node.
    pub control: Option<usize>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub nodes: Vec<TrajectoryNode>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    /// Checks the ordering invariants: `t` and `s` strictly increasing, cost
    /// starting at zero and non-decreasing.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if let Some(first) = self.nodes.first() {
            if first.cost != 0.0 {
                return Err(format!("initial cost {} is not zero", first.cost));
            }
        }
        for (i, w) in self.nodes.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(format!("t not increasing at node {}", i + 1));
            }
            if !(w[1].s > w[0].s) {
                return Err(format!("s not increasing at node {}", i + 1));
            }
            if w[1].cost < w[0].cost {
                return Err(format!("cost decreases at node {}", i + 1));
            }
        }
        Ok(())
    }

    pub fn final_cost(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::examples::{power_law_system, spiral_system};
    use proptest::prelude::*;

    fn min_time() -> ControlSystem {
        power_law_system(0.0, 0.0, 1.0, 1.0)
    }

    #[test]
    fn spiral_dynamics_hand_value() {
        let sys = spiral_system(1.0);
        let one = sys.controls().iter().position(|c| c[0] == 1.0).unwrap();
        let f = sys.eval_dynamics(&[2.0, 0.0], one).unwrap();
        assert!((f[0] + 2.0).abs() < 1e-15 && (f[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn power_law_dynamics_values() {
        let sys = power_law_system(1.0, 0.0, 1.0, 1.0);
        for a in 0..2 {
            assert_eq!(sys.eval_dynamics(&[0.0], a).unwrap(), vec![0.0]);
        }
        let sys = power_law_system(2.0, 0.0, 1.0, 1.0);
        let up = sys.controls().iter().position(|c| c[0] == 1.0).unwrap();
        assert!((sys.eval_dynamics(&[0.5], up).unwrap()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_dynamics_reported() {
        let sys = spiral_system(1.0);
        match sys.eval_dynamics(&[1.0, 0.0], 0) {
            Err(Error::SingularDynamics { x }) => assert_eq!(x, vec![1.0, 0.0]),
            other => panic!("expected SingularDynamics, got {other:?}"),
        }
        assert!(matches!(
            sys.eval_dynamics(&[2.0, 0.0], 7),
            Err(Error::InvalidControl { index: 7, len: 2 })
        ));
    }

    #[test]
    fn negative_lagrangian_is_hard_error() {
        let sys = ControlSystem::new(1, vec![vec![0.0]], |_, _| vec![0.0], |x, _| x[0]);
        assert!(matches!(
            sys.eval_lagrangian(&[-1.0], 0),
            Err(Error::NegativeLagrangian { .. })
        ));
    }

    #[test]
    fn hamiltonian_examples() {
        let sys = min_time();
        assert!((sys.hamiltonian(&[1.0], 0.5, &[1.0]).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(sys.hamiltonian(&[0.3], 0.0, &[0.0]).unwrap(), 0.0);
        let down = sys.hamiltonian_argmin(&[1.0], 0.5, &[1.0]).unwrap();
        assert_eq!(sys.controls()[down], vec![-1.0]);
        let up = sys.hamiltonian_argmin(&[-1.0], 0.5, &[-1.0]).unwrap();
        assert_eq!(sys.controls()[up], vec![1.0]);
    }

    #[test]
    fn argmin_tie_break_lowest_index() {
        let sys = ControlSystem::new(1, vec![vec![0.0], vec![1.0], vec![2.0]], |_, _| vec![0.0], |_, _| 0.0);
        assert_eq!(sys.hamiltonian_argmin(&[3.0], 1.0, &[2.0]).unwrap(), 0);
    }

    #[test]
    fn empty_control_set_is_config_error() {
        let sys = ControlSystem::new(1, vec![], |_, _| vec![0.0], |_, _| 0.0);
        assert!(matches!(sys.hamiltonian(&[0.0], 1.0, &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn targets_and_partitions() {
        let c = TargetSet::annulus_complement(1.0, 4.0);
        assert_eq!(c.distance(&[3.5, 0.0]), 0.5);
        assert_eq!(c.distance(&[0.5, 0.0]), 0.0);
        assert!(c.contains(&[5.0, 0.0]));
        assert_eq!(c.distance_gradients(&[2.5, 0.0]).unwrap().len(), 2);
        let p = Partition::new(vec![0.0, 0.1, 0.4, 0.5]).unwrap();
        assert!((p.diameter() - 0.3).abs() < 1e-15);
        assert!(Partition::new(vec![0.0, 0.1, 0.1]).is_err());
        assert!(Partition::new(vec![0.1, 0.2]).is_err());
    }

    fn random_system(seed_controls: Vec<(f64, f64, f64)>) -> ControlSystem {
        let controls = seed_controls.iter().map(|&(a, b, c)| vec![a, b, c]).collect();
        ControlSystem::new(
            2,
            controls,
            |x, a| vec![a[0] * x[1] + a[1], -a[2] * x[0] + x[1] * x[1] * a[0]],
            |x, a| (x[0] * a[1]).powi(2) + a[2].abs(),
        )
    }

    proptest! {
        #[test]
        fn hamiltonian_matches_scan_and_is_homogeneous(
            ctrl in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 5),
            x in proptest::array::uniform2(-3.0f64..3.0),
            p in proptest::array::uniform2(-3.0f64..3.0),
            p0 in 0.0f64..2.0,
            lambda in 0.01f64..50.0,
        ) {
            let sys = random_system(ctrl);
            let (arg, h) = sys.hamiltonian_with_argmin(&x, p0, &p).unwrap();
            let scan: Vec<f64> = (0..5).map(|a| sys.integrand(&x, p0, &p, a).unwrap()).collect();
            prop_assert!(scan.iter().all(|v| h <= *v));
            prop_assert_eq!(h, scan[arg]);
            prop_assert!(scan[..arg].iter().all(|v| *v > h));
            let ps: Vec<f64> = p.iter().map(|v| v * lambda).collect();
            let hs = sys.hamiltonian(&x, lambda * p0, &ps).unwrap();
            prop_assert!((hs - lambda * h).abs() <= 1e-9 * (1.0 + hs.abs()));
        }

        #[test]
        fn annulus_distance_is_lipschitz(
            x in proptest::array::uniform2(-5.0f64..5.0),
            y in proptest::array::uniform2(-5.0f64..5.0),
        ) {
            let c = TargetSet::annulus_complement(1.0, 4.0);
            let gap = ((x[0]-y[0]).powi(2) + (x[1]-y[1]).powi(2)).sqrt();
            prop_assert!(c.distance(&x) >= 0.0);
            prop_assert!((c.distance(&x) - c.distance(&y)).abs() <= gap + 1e-12);
        }
    }
}
