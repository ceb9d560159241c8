use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modulus::DecreaseModulus;
use super::mrf::CandidateMrf;
use crate::error::Result;
use crate::grid::UniformGrid;
use crate::system::{ControlSystem, TargetSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginFailure {
    pub x: Vec<f64>,
    pub u: f64,
    pub h: f64,
    pub bound: f64,
}

/// Outcome of `H(x, p0_bar, grad U(x)) <= -m(U(x))` on smooth grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub checked: usize,
    pub skipped_nonsmooth: usize,
    pub skipped_out_of_range: usize,
    /// Largest `H + m(U)`; non-positive when the check passes.
    pub worst_margin: f64,
    pub worst_at: Vec<f64>,
    pub failure_count: usize,
    pub failures: Vec<MarginFailure>,
}

impl SupersolutionReport {
    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }

    pub fn skipped_fraction(&self) -> f64 {
        let total = self.checked + self.skipped_nonsmooth;
        if total == 0 {
            0.0
        } else {
            self.skipped_nonsmooth as f64 / total as f64
        }
    }
}

enum Sample {
    Outside,
    OutOfRange,
    Nonsmooth,
    Checked { flat: usize, u: f64, h: f64, bound: f64 },
}

/// Checks the supersolution inequality at grid nodes outside the target
/// where exactly one smooth piece is active and `U` lies in the certified
/// range of `modulus`.
pub fn check_supersolution(
    system: &ControlSystem,
    target: &TargetSet,
    mrf: &CandidateMrf,
    modulus: &DecreaseModulus,
    grid: &UniformGrid,
) -> Result<SupersolutionReport> {
    let (lo, hi) = modulus.range();
    let samples: Vec<Sample> = (0..grid.len())
        .into_par_iter()
        .map(|flat| -> Result<Sample> {
            let x = grid.point(flat);
            if target.contains(&x) {
                return Ok(Sample::Outside);
            }
            let u = mrf.value(&x);
            if !(u >= lo && u <= hi) {
                return Ok(Sample::OutOfRange);
            }
            let Some(p) = mrf.smooth_gradient(&x) else {
                return Ok(Sample::Nonsmooth);
            };
            let h = system.hamiltonian(&x, mrf.p0_bar(), &p)?;
            Ok(Sample::Checked {
                flat,
                u,
                h,
                bound: -modulus.eval(u),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = SupersolutionReport {
        checked: 0,
        skipped_nonsmooth: 0,
        skipped_out_of_range: 0,
        worst_margin: f64::NEG_INFINITY,
        worst_at: Vec::new(),
        failure_count: 0,
        failures: Vec::new(),
    };
    for s in samples {
        match s {
            Sample::Outside => {}
            Sample::OutOfRange => report.skipped_out_of_range += 1,
            Sample::Nonsmooth => report.skipped_nonsmooth += 1,
            Sample::Checked { flat, u, h, bound } => {
                report.checked += 1;
                let margin = h - bound;
                if margin > report.worst_margin {
                    report.worst_margin = margin;
                    report.worst_at = grid.point(flat);
                }
                if margin > 0.0 {
                    report.failure_count += 1;
                    if report.failures.len() < super::band::MAX_REPORTED {
                        report.failures.push(MarginFailure {
                            x: grid.point(flat),
                            u,
                            h,
                            bound,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::examples::{power_law_mrf, power_law_system};

    fn setup(p0: f64) -> (ControlSystem, TargetSet, CandidateMrf) {
        let sys = power_law_system(0.0, 0.0, 1.0, 1.0);
        let mrf = power_law_mrf(0.0, 0.0, 1.0, 1.0, p0);
        (sys, TargetSet::point(vec![0.0]), mrf)
    }

    #[test]
    fn min_time_passes_at_one() {
        let (sys, target, mrf) = setup(0.5);
        let m = DecreaseModulus::from_knots(vec![(0.0, 0.0), (0.1, 0.04), (1.0, 0.45)], 1e-6).unwrap();
        let grid = UniformGrid::with_counts(vec![1.0], vec![2.0], vec![2]).unwrap();
        let rep = check_supersolution(&sys, &target, &mrf, &m, &grid).unwrap();
        assert_eq!(rep.checked, 1);
        assert!((rep.worst_margin - (-0.5 + 0.45)).abs() < 1e-12);
        assert!(rep.passed());
    }

    #[test]
    fn inflated_modulus_fails() {
        let (sys, target, mrf) = setup(0.5);
        let m = DecreaseModulus::from_knots(vec![(0.0, 0.0), (0.1, 0.6), (2.0, 0.8)], 1e-6).unwrap();
        let grid = UniformGrid::with_spacing(vec![-2.0], vec![2.0], 0.05).unwrap();
        let rep = check_supersolution(&sys, &target, &mrf, &m, &grid).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.failure_count, rep.checked);
        assert!(rep.worst_margin > 0.0);
    }

    #[test]
    fn all_nonsmooth_grid_is_vacuous() {
        let sys = power_law_system(0.0, 0.0, 1.0, 1.0);
        let target = TargetSet::point(vec![0.0]);
        // two pieces agreeing everywhere: every point is a kink
        let mrf = CandidateMrf::new(
            "doubled",
            |x: &[f64]| x[0].abs(),
            vec![
                super::super::mrf::SmoothPiece::new(|_: &[f64]| true, |x: &[f64]| x[0].abs(), |_: &[f64]| vec![1.0]),
                super::super::mrf::SmoothPiece::new(|_: &[f64]| true, |x: &[f64]| x[0].abs(), |_: &[f64]| vec![-1.0]),
            ],
            0.5,
        );
        let m = DecreaseModulus::from_knots(vec![(0.0, 0.0), (0.1, 0.04), (2.0, 0.5)], 1e-6).unwrap();
        let grid = UniformGrid::with_spacing(vec![0.5], vec![1.5], 0.1).unwrap();
        let rep = check_supersolution(&sys, &target, &mrf, &m, &grid).unwrap();
        assert_eq!(rep.checked, 0);
        assert_eq!(rep.skipped_nonsmooth, grid.len());
        assert_eq!(rep.skipped_fraction(), 1.0);
        assert!(rep.passed());
    }
}
