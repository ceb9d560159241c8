//! Grid certification of the strict Hamiltonian inequality on level bands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mrf::{BandConstants, CandidateMrf};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::numerics::norm;
use crate::system::{ControlSystem, TargetSet};

/// Level band and acceptance thresholds for [`verify_mrf_band`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub delta: f64,
    /// Upper level; `None` means the largest sampled value of `U`.
    pub sigma: Option<f64>,
    /// Number of geometric level knots in `[delta, sigma[`.
    pub levels: usize,
    /// Every `m_hat` sample must exceed this.
    pub margin: f64,
    /// Largest value of `U` accepted near the target boundary.
    pub u_tol: f64,
    /// Points with `0 < d(x) <= d_tol` stand in for the target boundary.
    pub d_tol: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            sigma: None,
            levels: 24,
            margin: 0.0,
            u_tol: 1e-2,
            d_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub h: f64,
}

/// `m_hat(level) = -max { H(x, p0_bar, p) : U(x) in [level, sigma], p in D*U(x) }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSample {
    pub level: f64,
    pub m_hat: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveDefiniteness {
    pub checked: usize,
    pub nonpositive: usize,
    pub nonfinite: usize,
    /// Smallest sampled value; non-finite samples count as `-inf`.
    pub min_value: f64,
    pub min_at: Vec<f64>,
    pub boundary_points: usize,
    pub boundary_max_value: f64,
    pub boundary_vanishes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Properness {
    pub box_nodes_checked: usize,
    pub min_box_value: f64,
    pub min_box_at: Vec<f64>,
    pub bounded: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotPositiveDefinite,
    Unbounded,
    HamiltonianViolation,
    GradientBound,
    MarginTooSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub candidate: String,
    pub p0_bar: f64,
    pub grid_lower: Vec<f64>,
    pub grid_upper: Vec<f64>,
    pub grid_counts: Vec<usize>,
    pub grid_spacing: f64,
    pub delta: f64,
    pub sigma: f64,
    pub margin: f64,
    pub points_total: usize,
    pub points_in_band: usize,
    pub nonsmooth_points: usize,
    pub m_hat: Vec<LevelSample>,
    pub worst_h: f64,
    pub worst_at: Vec<f64>,
    pub violation_count: usize,
    /// First violations in grid order (at most [`MAX_REPORTED`]).
    pub violations: Vec<Violation>,
    pub positive_definiteness: PositiveDefiniteness,
    pub properness: Properness,
    pub constants: Vec<BandConstants>,
    pub constants_estimated: bool,
    pub gradient_bound_violations: usize,
    pub verdict: Verdict,
}

pub const MAX_REPORTED: usize = 64;

struct PointRecord {
    flat: usize,
    u: f64,
    d: f64,
    on_box: bool,
    in_band: bool,
    h_max: f64,
    h_arg: Vec<f64>,
    grad_norm: f64,
    second_diff: f64,
    nonsmooth: bool,
}

impl BandReport {
    pub fn certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    /// Converts a failed verdict into the matching error.
    pub fn ensure_certified(&self) -> Result<()> {
        match self.verdict {
            Verdict::Certified => Ok(()),
            Verdict::NotPositiveDefinite => Err(Error::PositiveDefiniteness {
                x: self.positive_definiteness.min_at.clone(),
                value: self.positive_definiteness.min_value,
            }),
            Verdict::Unbounded => Err(Error::Unbounded {
                x: self.properness.min_box_at.clone(),
                value: self.properness.min_box_value,
                sigma: self.sigma,
            }),
            Verdict::HamiltonianViolation | Verdict::MarginTooSmall | Verdict::GradientBound => Err(Error::Violation {
                count: self.violation_count.max(1),
                worst: self.worst_h,
                x: self.worst_at.clone(),
            }),
        }
    }

    /// `(level, m_hat)` pairs ready for [`super::build_decrease_modulus`].
    pub fn m_hat_pairs(&self) -> Vec<(f64, f64)> {
        self.m_hat.iter().map(|s| (s.level, s.m_hat)).collect()
    }
}

/// Geometric level knots `delta * (sigma/delta)^(i/levels)`, `i < levels`.
pub fn band_levels(delta: f64, sigma: f64, levels: usize) -> Vec<f64> {
    let n = levels.max(1);
    let ratio = sigma / delta;
    (0..n).map(|i| delta * ratio.powf(i as f64 / n as f64)).collect()
}

fn second_difference(mrf: &CandidateMrf, target: &TargetSet, x: &[f64], u: f64, h: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for axis in 0..x.len() {
        xp[axis] = x[axis] + h;
        xm[axis] = x[axis] - h;
        if !target.contains(&xp) && !target.contains(&xm) {
            let q = (mrf.value(&xp) + mrf.value(&xm) - 2.0 * u) / (4.0 * h * h);
            if q.is_finite() {
                worst = worst.max(q);
            }
        }
        xp[axis] = x[axis];
        xm[axis] = x[axis];
    }
    worst
}

/// Samples `H(x, p0_bar, D*U(x))` on every grid node whose level lies in
/// `[delta, sigma]`, together with positive definiteness, band boundedness
/// and per-band constants.
pub fn verify_mrf_band(
    system: &ControlSystem,
    target: &TargetSet,
    mrf: &CandidateMrf,
    grid: &UniformGrid,
    spec: &BandSpec,
) -> Result<BandReport> {
    if grid.dim() != system.state_dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match state dimension {}",
            grid.dim(),
            system.state_dim()
        )));
    }
    if !(spec.delta > 0.0) {
        return Err(Error::Config(format!("delta = {} must be positive", spec.delta)));
    }
    let p0 = mrf.p0_bar();
    if p0 < 0.0 {
        return Err(Error::Config(format!("p0_bar = {p0} must be non-negative")));
    }

    let values: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let x = grid.point(flat);
            (target.distance(&x), mrf.value(&x))
        })
        .collect();
    let sigma = match spec.sigma {
        Some(s) => s,
        None => values
            .iter()
            .filter(|(d, u)| *d > 0.0 && u.is_finite())
            .map(|(_, u)| *u)
            .fold(f64::NEG_INFINITY, f64::max),
    };
    if !(spec.delta < sigma) {
        return Err(Error::Config(format!(
            "band is empty: delta = {} is not below sigma = {sigma}",
            spec.delta
        )));
    }
    let h = grid.max_spacing();

    let records: Vec<PointRecord> = (0..grid.len())
        .into_par_iter()
        .filter(|&flat| !target.contains(&grid.point(flat)))
        .map(|flat| -> Result<PointRecord> {
            let x = grid.point(flat);
            let (d, u) = values[flat];
            let in_band = u.is_finite() && u >= spec.delta && u <= sigma;
            let mut rec = PointRecord {
                flat,
                u,
                d,
                on_box: grid.is_boundary(flat),
                in_band,
                h_max: f64::NEG_INFINITY,
                h_arg: Vec::new(),
                grad_norm: 0.0,
                second_diff: f64::NEG_INFINITY,
                nonsmooth: false,
            };
            if in_band {
                let grads = mrf.limiting_gradients(&x)?;
                rec.nonsmooth = grads.len() > 1;
                for p in grads {
                    let hv = system.hamiltonian(&x, p0, &p)?;
                    rec.grad_norm = rec.grad_norm.max(norm(&p));
                    if hv > rec.h_max {
                        rec.h_max = hv;
                        rec.h_arg = p;
                    }
                }
                rec.second_diff = second_difference(mrf, target, &x, u, h);
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let mut pd = PositiveDefiniteness {
        checked: 0,
        nonpositive: 0,
        nonfinite: 0,
        min_value: f64::INFINITY,
        min_at: Vec::new(),
        boundary_points: 0,
        boundary_max_value: 0.0,
        boundary_vanishes: true,
    };
    let mut proper = Properness {
        box_nodes_checked: 0,
        min_box_value: f64::INFINITY,
        min_box_at: Vec::new(),
        bounded: true,
    };
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut worst_h = f64::NEG_INFINITY;
    let mut worst_at = Vec::new();
    let mut nonsmooth_points = 0;
    let mut band: Vec<(f64, f64, f64, f64)> = Vec::new(); // (u, h_max, |p|, second diff)

    for rec in &records {
        pd.checked += 1;
        let u_bad = !rec.u.is_finite() || rec.u <= 0.0;
        if u_bad {
            pd.nonpositive += 1;
        }
        if !rec.u.is_finite() {
            pd.nonfinite += 1;
        }
        let key = if rec.u.is_finite() { rec.u } else { f64::NEG_INFINITY };
        if pd.min_at.is_empty() || key < pd.min_value {
            pd.min_value = key;
            pd.min_at = grid.point(rec.flat);
        }
        if rec.d <= spec.d_tol {
            pd.boundary_points += 1;
            if rec.u.is_finite() {
                pd.boundary_max_value = pd.boundary_max_value.max(rec.u);
            } else {
                pd.boundary_max_value = f64::INFINITY;
            }
        }
        if rec.on_box {
            proper.box_nodes_checked += 1;
            if rec.u < proper.min_box_value || proper.min_box_at.is_empty() {
                proper.min_box_value = rec.u;
                proper.min_box_at = grid.point(rec.flat);
            }
            if !(rec.u > sigma) {
                proper.bounded = false;
            }
        }
        if rec.in_band {
            if rec.nonsmooth {
                nonsmooth_points += 1;
            }
            if rec.h_max > worst_h {
                worst_h = rec.h_max;
                worst_at = grid.point(rec.flat);
            }
            if rec.h_max >= 0.0 {
                violation_count += 1;
                if violations.len() < MAX_REPORTED {
                    violations.push(Violation {
                        x: grid.point(rec.flat),
                        p: rec.h_arg.clone(),
                        h: rec.h_max,
                    });
                }
            }
            band.push((rec.u, rec.h_max, rec.grad_norm, rec.second_diff));
        }
    }
    pd.boundary_vanishes = pd.boundary_max_value <= spec.u_tol;

    band.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix_max = vec![f64::NEG_INFINITY; band.len() + 1];
    for i in (0..band.len()).rev() {
        suffix_max[i] = suffix_max[i + 1].max(band[i].1);
    }
    let levels = band_levels(spec.delta, sigma, spec.levels);
    let mut m_hat = Vec::new();
    for &level in &levels {
        let start = band.partition_point(|b| b.0 < level);
        if start < band.len() {
            m_hat.push(LevelSample {
                level,
                m_hat: -suffix_max[start],
                samples: band.len() - start,
            });
        }
    }
    // m_hat is non-decreasing, so the last band sample is a lower bound at sigma
    if let Some(last) = m_hat.last().copied() {
        m_hat.push(LevelSample {
            level: sigma,
            m_hat: last.m_hat,
            samples: 0,
        });
    }

    let mut knots = levels.clone();
    knots.push(sigma);
    let (constants, estimated) = if mrf.band_constants().is_empty() {
        let consts = knots
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let mut lip: f64 = 0.0;
                let mut semi: f64 = 0.0;
                for b in band.iter().filter(|b| b.0 >= lo && b.0 <= hi) {
                    lip = lip.max(b.2);
                    semi = semi.max(b.3);
                }
                BandConstants {
                    lo,
                    hi,
                    lipschitz: 1.5 * lip,
                    semiconcavity: 1.5 * semi,
                }
            })
            .collect();
        (consts, true)
    } else {
        (mrf.band_constants().to_vec(), false)
    };
    let gradient_bound_violations = if estimated {
        0
    } else {
        band.iter()
            .filter(|b| {
                constants
                    .iter()
                    .find(|c| b.0 >= c.lo && b.0 <= c.hi)
                    .is_some_and(|c| b.2 > c.lipschitz)
            })
            .count()
    };

    let verdict = if pd.nonpositive > 0 {
        Verdict::NotPositiveDefinite
    } else if !proper.bounded {
        Verdict::Unbounded
    } else if violation_count > 0 {
        Verdict::HamiltonianViolation
    } else if gradient_bound_violations > 0 {
        Verdict::GradientBound
    } else if m_hat.is_empty() || m_hat.iter().any(|s| !(s.m_hat > spec.margin)) {
        Verdict::MarginTooSmall
    } else {
        Verdict::Certified
    };

    Ok(BandReport {
        candidate: mrf.name().to_string(),
        p0_bar: p0,
        grid_lower: grid.lower().to_vec(),
        grid_upper: grid.upper().to_vec(),
        grid_counts: grid.counts().to_vec(),
        grid_spacing: h,
        delta: spec.delta,
        sigma,
        margin: spec.margin,
        points_total: grid.len(),
        points_in_band: band.len(),
        nonsmooth_points,
        m_hat,
        worst_h,
        worst_at,
        violation_count,
        violations,
        positive_definiteness: pd,
        properness: proper,
        constants,
        constants_estimated: estimated,
        gradient_bound_violations,
        verdict,
    })
}
