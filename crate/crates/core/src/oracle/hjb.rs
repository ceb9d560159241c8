//! Semi-Lagrangian value iteration for the exit-time value function
//! `V(x) = inf int l dt` over paths approaching the target.
//!
//! Update: `V(x) <- min_a h l(x, a) + V(x + h f(x, a))`, with `V` at the
//! foot point multilinearly interpolated and `V = 0` on target nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::system::{ControlSystem, TargetSet};

/// Stand-in for `+inf` during the sweeps; foot points outside the box get it.
const BIG: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// In-place sweeps alternating forward and backward node order.
    GaussSeidel,
    /// Synchronous sweeps, parallel over nodes.
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjbConfig {
    /// Time step of the one-step Euler characteristic.
    pub h: f64,
    pub iter_tol: f64,
    pub max_sweeps: usize,
    pub mode: SweepMode,
}

impl Default for HjbConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            iter_tol: 1e-8,
            max_sweeps: 100_000,
            mode: SweepMode::GaussSeidel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Target,
    /// Value prescribed by the caller (e.g. a collar around a singularity).
    Fixed,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridValueTable {
    pub grid: UniformGrid,
    pub h: f64,
    /// `+inf` where no admissible path was found.
    pub values: Vec<f64>,
    pub kinds: Vec<NodeKind>,
    pub sweeps: usize,
    /// Sup-norm change of every sweep.
    pub changes: Vec<f64>,
    /// No node value ever increased during the sweeps.
    pub monotone: bool,
}

impl GridValueTable {
    pub fn value_at_node(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    /// Multilinear interpolation; `None` outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let stencil = stencil(&self.grid, x)?;
        Some(stencil.iter().map(|&(i, w)| w * self.values[i]).sum())
    }

    pub fn free_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Free).count()
    }
}

/// Corner indices and weights of the cell containing `x`.
fn stencil(grid: &UniformGrid, x: &[f64]) -> Option<Vec<(usize, f64)>> {
    if !grid.contains(x) {
        return None;
    }
    let dim = grid.dim();
    let mut base = Vec::with_capacity(dim);
    let mut frac = Vec::with_capacity(dim);
    for axis in 0..dim {
        let n = grid.counts()[axis];
        let pos = (x[axis] - grid.lower()[axis]) / grid.spacing(axis);
        let i = (pos.floor().max(0.0) as usize).min(n - 2);
        base.push(i);
        frac.push((pos - i as f64).clamp(0.0, 1.0));
    }
    let mut out = Vec::with_capacity(1 << dim);
    let mut idx = vec![0usize; dim];
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        for axis in 0..dim {
            let up = (corner >> axis) & 1 == 1;
            idx[axis] = base[axis] + up as usize;
            w *= if up { frac[axis] } else { 1.0 - frac[axis] };
        }
        if w != 0.0 {
            out.push((grid.flat_index(&idx), w));
        }
    }
    Some(out)
}

/// Precomputed update of one control at one free node.
struct Candidate {
    running: f64,
    foot: Option<Vec<(usize, f64)>>,
}

pub fn hjb_value_iteration(
    system: &ControlSystem,
    target: &TargetSet,
    grid: &UniformGrid,
    config: &HjbConfig,
) -> Result<GridValueTable> {
    hjb_value_iteration_with(system, target, grid, config, &|_: &[f64]| None)
}

/// As `hjb_value_iteration`, with `fixed(x) = Some(v)` prescribing `V = v`
/// at non-target nodes.
pub fn hjb_value_iteration_with(
    system: &ControlSystem,
    target: &TargetSet,
    grid: &UniformGrid,
    config: &HjbConfig,
    fixed: &(dyn Fn(&[f64]) -> Option<f64> + Sync),
) -> Result<GridValueTable> {
    if !(config.h > 0.0) || !(config.iter_tol > 0.0) || config.max_sweeps == 0 {
        return Err(Error::Config("hjb: h, iter_tol and max_sweeps must be positive".into()));
    }
    if grid.dim() != system.state_dim() {
        return Err(Error::Config(format!(
            "hjb: grid dimension {} differs from state dimension {}",
            grid.dim(),
            system.state_dim()
        )));
    }
    let n = grid.len();
    let setup: Vec<(NodeKind, f64, Vec<Candidate>)> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let x = grid.point(flat);
            if target.contains(&x) {
                return Ok((NodeKind::Target, 0.0, Vec::new()));
            }
            if let Some(v) = fixed(&x) {
                return Ok((NodeKind::Fixed, v, Vec::new()));
            }
            let cands = (0..system.control_count())
                .map(|a| {
                    let f = system.eval_dynamics(&x, a)?;
                    let foot: Vec<f64> = x.iter().zip(&f).map(|(xi, fi)| xi + config.h * fi).collect();
                    Ok(Candidate {
                        running: config.h * system.eval_lagrangian(&x, a)?,
                        foot: stencil(grid, &foot),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((NodeKind::Free, BIG, cands))
        })
        .collect::<Result<Vec<_>>>()?;

    let kinds: Vec<NodeKind> = setup.iter().map(|s| s.0).collect();
    let mut values: Vec<f64> = setup.iter().map(|s| s.1).collect();
    let cands: Vec<Vec<Candidate>> = setup.into_iter().map(|s| s.2).collect();
    let free: Vec<usize> = (0..n).filter(|&i| kinds[i] == NodeKind::Free).collect();

    let update = |i: usize, v: &[f64]| -> f64 {
        cands[i]
            .iter()
            .map(|c| match &c.foot {
                Some(st) => c.running + st.iter().map(|&(j, w)| w * v[j]).sum::<f64>(),
                None => BIG,
            })
            .fold(BIG, f64::min)
    };

    let mut changes = Vec::new();
    let mut monotone = true;
    let mut converged = false;
    for sweep in 0..config.max_sweeps {
        let mut change = 0.0f64;
        match config.mode {
            SweepMode::GaussSeidel => {
                let order: Box<dyn Iterator<Item = &usize>> = if sweep % 2 == 0 {
                    Box::new(free.iter())
                } else {
                    Box::new(free.iter().rev())
                };
                for &i in order {
                    let new = update(i, &values);
                    monotone &= new <= values[i];
                    change = change.max((new - values[i]).abs());
                    values[i] = new;
                }
            }
            SweepMode::Jacobi => {
                let new: Vec<(usize, f64)> = free.par_iter().map(|&i| (i, update(i, &values))).collect();
                for (i, v) in new {
                    monotone &= v <= values[i];
                    change = change.max((v - values[i]).abs());
                    values[i] = v;
                }
            }
        }
        changes.push(change);
        if change < config.iter_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            sweeps: changes.len(),
            last_change: *changes.last().unwrap_or(&f64::INFINITY),
        });
    }
    for v in &mut values {
        if *v >= 0.5 * BIG {
            *v = f64::INFINITY;
        }
    }
    Ok(GridValueTable {
        grid: grid.clone(),
        h: config.h,
        values,
        kinds,
        sweeps: changes.len(),
        changes,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::examples::{min_time_system, power_law_system};

    fn line(nodes: usize) -> UniformGrid {
        UniformGrid::with_counts(vec![-2.0], vec![2.0], vec![nodes]).unwrap()
    }

    #[test]
    fn min_time_matches_distance() {
        let grid = line(401);
        let t = hjb_value_iteration(
            &min_time_system(),
            &TargetSet::point(vec![0.0]),
            &grid,
            &HjbConfig::default(),
        )
        .unwrap();
        for i in 0..grid.len() {
            let x = grid.point(i)[0];
            assert!((t.values[i] - x.abs()).abs() < 1e-9, "x = {x}: {}", t.values[i]);
        }
        assert!(t.monotone);
        assert_eq!(t.kinds.iter().filter(|k| **k == NodeKind::Target).count(), 1);
    }

    #[test]
    fn zero_lagrangian_gives_zero() {
        let sys = power_law_system(0.0, 0.0, 1.0, 0.0);
        let grid = line(81);
        let cfg = HjbConfig {
            h: 0.05,
            ..Default::default()
        };
        let t = hjb_value_iteration(&sys, &TargetSet::point(vec![0.0]), &grid, &cfg).unwrap();
        assert!(t.values.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn jacobi_agrees_with_gauss_seidel() {
        let sys = power_law_system(0.0, 1.0, 1.0, 1.0);
        let grid = line(101);
        let target = TargetSet::point(vec![0.0]);
        let cfg = HjbConfig {
            h: 0.04,
            ..Default::default()
        };
        let gs = hjb_value_iteration(&sys, &target, &grid, &cfg).unwrap();
        let jac = hjb_value_iteration(
            &sys,
            &target,
            &grid,
            &HjbConfig {
                mode: SweepMode::Jacobi,
                ..cfg
            },
        )
        .unwrap();
        for (a, b) in gs.values.iter().zip(&jac.values) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!(jac.sweeps >= gs.sweeps);
    }

    #[test]
    fn single_sweep_does_not_converge() {
        let cfg = HjbConfig {
            max_sweeps: 1,
            ..Default::default()
        };
        let r = hjb_value_iteration(&min_time_system(), &TargetSet::point(vec![0.0]), &line(41), &cfg);
        assert!(matches!(r, Err(Error::NonConvergence { sweeps: 1, .. })));
    }

    #[test]
    fn interpolation_reproduces_linear_data() {
        let grid = UniformGrid::with_counts(vec![0.0, 0.0], vec![1.0, 2.0], vec![5, 9]).unwrap();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                1.0 + 2.0 * p[0] - 3.0 * p[1]
            })
            .collect();
        let t = GridValueTable {
            kinds: vec![NodeKind::Free; grid.len()],
            grid,
            h: 0.1,
            values,
            sweeps: 0,
            changes: Vec::new(),
            monotone: true,
        };
        let v = t.interpolate(&[0.33, 1.41]).unwrap();
        assert!((v - (1.0 + 0.66 - 4.23)).abs() < 1e-12);
        assert!(t.interpolate(&[1.5, 0.0]).is_none());
    }
}
