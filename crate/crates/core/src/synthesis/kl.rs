//! Distance envelopes `sigma_-`, `sigma_+` and the decay bound
//! `beta(r, t) = sigma_+(m~^{-1}(sigma_-^{-1}(r) (2eps+1)/(2eps+1+t)))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::lyapunov::{CandidateMrf, DecreaseModulus};
use crate::pwl::{strict_majorant, strict_minorant, MonotonePwl};
use crate::system::{TargetSet, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    /// Geometric knots in `[sigma * min_ratio, sigma]`.
    pub levels: usize,
    pub min_ratio: f64,
    /// Lipschitz constant of `U` used to widen the level sets by the grid
    /// resolution; `None` trusts the grid values as they are.
    pub lipschitz: Option<f64>,
    /// Minimum slope keeping both envelopes strictly increasing.
    pub floor: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            levels: 64,
            min_ratio: 1e-6,
            lipschitz: None,
            floor: 1e-9,
        }
    }
}

/// `sigma_-(U(z)) <= d(z) <= sigma_+(U(z))`, with `sigma_-` already
/// replaced by `min{sigma_-(r), r}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaEnvelopes {
    pub minus: MonotonePwl,
    pub plus: MonotonePwl,
    /// Raw grid optima `(r, min{d : U >= r})`, before shifting and flooring.
    pub raw_minus: Vec<(f64, f64)>,
    /// Raw grid optima `(r, max{d : U <= r})`.
    pub raw_plus: Vec<(f64, f64)>,
    /// Grid half-diagonal used for the resolution correction (0 without).
    pub resolution: f64,
}

impl SigmaEnvelopes {
    /// Envelopes given in closed form.
    pub fn exact(minus: MonotonePwl, plus: MonotonePwl) -> Self {
        Self {
            minus: minus.min_with_identity(),
            plus,
            raw_minus: Vec::new(),
            raw_plus: Vec::new(),
            resolution: 0.0,
        }
    }

    /// `U = d`.
    pub fn identity() -> Self {
        Self::exact(MonotonePwl::identity(), MonotonePwl::identity())
    }
}

/// Grid construction of the envelopes.
///
/// Each knot value is taken from the neighbouring knot on the conservative
/// side (`sigma_-` from the knot below, `sigma_+` from the knot above) so
/// the piecewise-linear interpolants stay on the correct side between knots.
pub fn build_sigma_envelopes(
    mrf: &CandidateMrf,
    target: &TargetSet,
    grid: &UniformGrid,
    sigma: f64,
    params: &EnvelopeParams,
) -> Result<SigmaEnvelopes> {
    if !(sigma > 0.0) || params.levels < 2 || !(params.min_ratio > 0.0 && params.min_ratio < 1.0) {
        return Err(Error::Config("invalid envelope parameters".into()));
    }
    let samples: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .filter_map(|flat| {
            let x = grid.point(flat);
            if target.contains(&x) {
                return None;
            }
            let u = mrf.value(&x);
            u.is_finite().then(|| (u, target.distance(&x)))
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Config("no grid node outside the target".into()));
    }
    let half_diag = 0.5 * (0..grid.dim()).map(|k| grid.spacing(k).powi(2)).sum::<f64>().sqrt();
    let (dilation, resolution) = match params.lipschitz {
        Some(l) => (l * half_diag, half_diag),
        None => (0.0, 0.0),
    };
    let n = params.levels;
    let rs: Vec<f64> = (0..n)
        .map(|i| sigma * params.min_ratio.powf(1.0 - i as f64 / (n - 1) as f64))
        .collect();

    let raw_minus: Vec<(f64, f64)> = rs
        .iter()
        .filter_map(|&r| {
            samples
                .iter()
                .filter(|(u, _)| *u >= r - dilation)
                .map(|(_, d)| *d)
                .reduce(f64::min)
                .map(|d| (r, d))
        })
        .collect();
    let raw_plus: Vec<(f64, f64)> = rs
        .iter()
        .filter_map(|&r| {
            samples
                .iter()
                .filter(|(u, _)| *u <= r + dilation)
                .map(|(_, d)| *d)
                .reduce(f64::max)
                .map(|d| (r, d))
        })
        .collect();

    // sigma_-: knot r_i gets the optimum at r_{i-1}; the first knot gets 0
    let mut xs = Vec::new();
    let mut targets = Vec::new();
    for (i, &r) in rs.iter().enumerate() {
        let below = if i == 0 {
            Some(0.0)
        } else {
            raw_minus.iter().find(|k| k.0 == rs[i - 1]).map(|k| k.1)
        };
        if let Some(v) = below {
            xs.push(r);
            targets.push((v - resolution).min(r).max(params.floor * r));
        }
    }
    if xs.is_empty() {
        return Err(Error::Config("sigma_- has no admissible knot".into()));
    }
    let vals = strict_minorant(&xs, &targets, params.floor);
    let mut knots = vec![(0.0, 0.0)];
    knots.extend(xs.iter().copied().zip(vals));
    let minus = MonotonePwl::new(knots, params.floor)?.min_with_identity();

    // sigma_+: knot r_i gets the optimum at r_{i+1} (the top knot keeps its own)
    let mut xs = Vec::new();
    let mut targets = Vec::new();
    for (i, &r) in rs.iter().enumerate() {
        let above = raw_plus
            .iter()
            .find(|k| k.0 == rs[(i + 1).min(n - 1)])
            .or_else(|| raw_plus.iter().find(|k| k.0 == r))
            .map(|k| k.1);
        if let Some(v) = above {
            xs.push(r);
            targets.push((v + resolution).max(params.floor * r));
        }
    }
    if xs.is_empty() {
        return Err(Error::Config("sigma_+ has no admissible knot".into()));
    }
    let vals = strict_majorant(&xs, &targets, params.floor);
    let mut knots = vec![(0.0, 0.0)];
    knots.extend(xs.iter().copied().zip(vals));
    let tail = (knots.last().unwrap().1 / knots.last().unwrap().0).max(params.floor);
    let plus = MonotonePwl::new(knots, tail)?;

    Ok(SigmaEnvelopes {
        minus,
        plus,
        raw_minus,
        raw_plus,
        resolution,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichAudit {
    pub samples: usize,
    pub checked: usize,
    pub failures: usize,
    /// Largest `sigma_-(U(z)) - d(z)` and `d(z) - sigma_+(U(z))`.
    pub worst_lower: f64,
    pub worst_upper: f64,
}

/// Checks `sigma_-(U(z)) <= d(z) <= sigma_+(U(z))` at uniformly random
/// `z` in the box whose level lies in `]0, sigma]`.
pub fn audit_envelopes(
    env: &SigmaEnvelopes,
    mrf: &CandidateMrf,
    target: &TargetSet,
    lower: &[f64],
    upper: &[f64],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> SandwichAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut audit = SandwichAudit {
        samples,
        checked: 0,
        failures: 0,
        worst_lower: f64::NEG_INFINITY,
        worst_upper: f64::NEG_INFINITY,
    };
    for _ in 0..samples {
        let z: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| rng.random_range(*a..*b)).collect();
        if target.contains(&z) {
            continue;
        }
        let u = mrf.value(&z);
        if !(u > 0.0 && u <= sigma) {
            continue;
        }
        let d = target.distance(&z);
        audit.checked += 1;
        let lo = env.minus.eval(u) - d;
        let hi = d - env.plus.eval(u);
        audit.worst_lower = audit.worst_lower.max(lo);
        audit.worst_upper = audit.worst_upper.max(hi);
        if lo > 0.0 || hi > 0.0 {
            audit.failures += 1;
        }
    }
    audit
}

/// The composed decay certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlBound {
    pub sigma_minus: MonotonePwl,
    pub sigma_plus: MonotonePwl,
    /// `m~(r) = min{r, m(r)}`.
    pub m_tilde: MonotonePwl,
    pub epsilon: f64,
}

impl KlBound {
    pub fn new(env: &SigmaEnvelopes, modulus: &DecreaseModulus, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon = {epsilon} must be positive")));
        }
        let m_tilde = modulus.function().min_with_identity();
        for f in [&env.minus, &env.plus, &m_tilde] {
            if !(f.min_slope() > 0.0) {
                return Err(Error::NotInvertible("flat segment in the decay certificate".into()));
            }
        }
        Ok(Self {
            sigma_minus: env.minus.clone(),
            sigma_plus: env.plus.clone(),
            m_tilde,
            epsilon,
        })
    }

    pub fn beta(&self, r: f64, t: f64) -> f64 {
        let c = 2.0 * self.epsilon + 1.0;
        let level = self.sigma_minus.inverse(r);
        self.sigma_plus.eval(self.m_tilde.inverse(level * c / (c + t.max(0.0))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlAxioms {
    pub lattice: (usize, usize),
    pub zero_at_zero: bool,
    pub increasing_in_r: bool,
    pub nonincreasing_in_t: bool,
    pub vanishing_in_t: bool,
}

impl KlAxioms {
    pub fn holds(&self) -> bool {
        self.zero_at_zero && self.increasing_in_r && self.nonincreasing_in_t && self.vanishing_in_t
    }
}

/// Class-KL checks on the lattice `r_i = r_max i/nr`, `t_j = t_max j/(nt-1)`;
/// vanishing is tested at `t = t_far`.
pub fn check_kl_axioms(kl: &KlBound, r_max: f64, t_max: f64, nr: usize, nt: usize, t_far: f64) -> KlAxioms {
    let rs: Vec<f64> = (1..=nr).map(|i| r_max * i as f64 / nr as f64).collect();
    let ts: Vec<f64> = (0..nt).map(|j| t_max * j as f64 / (nt - 1).max(1) as f64).collect();
    let zero_at_zero = ts.iter().all(|&t| kl.beta(0.0, t) == 0.0);
    let increasing_in_r = ts.iter().all(|&t| {
        let mut prev = 0.0;
        rs.iter().all(|&r| {
            let b = kl.beta(r, t);
            let ok = b > prev;
            prev = b;
            ok
        })
    });
    let nonincreasing_in_t = rs
        .iter()
        .all(|&r| ts.windows(2).all(|w| kl.beta(r, w[1]) <= kl.beta(r, w[0])));
    let vanishing_in_t = rs
        .iter()
        .all(|&r| kl.beta(r, t_far) <= 1e-6 * kl.beta(r, 0.0).max(f64::MIN_POSITIVE));
    KlAxioms {
        lattice: (nr, nt),
        zero_at_zero,
        increasing_in_r,
        nonincreasing_in_t,
        vanishing_in_t,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlAudit {
    pub checked: usize,
    pub failures: usize,
    /// Largest `d(z(t)) - beta(d(x), t)`.
    pub worst_slack: f64,
    pub worst_t: f64,
    pub tol: f64,
}

impl KlAudit {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks `d(z(t)) <= beta(d(x), t) + tol` at every node.
pub fn verify_kl(traj: &Trajectory, kl: &KlBound, target: &TargetSet, x: &[f64], tol: f64) -> KlAudit {
    let r = target.distance(x);
    let mut audit = KlAudit {
        checked: 0,
        failures: 0,
        worst_slack: f64::NEG_INFINITY,
        worst_t: 0.0,
        tol,
    };
    for node in &traj.nodes {
        let slack = target.distance(&node.x) - kl.beta(r, node.t);
        audit.checked += 1;
        if slack > audit.worst_slack {
            audit.worst_slack = slack;
            audit.worst_t = node.t;
        }
        if slack > tol {
            audit.failures += 1;
        }
    }
    audit
}
