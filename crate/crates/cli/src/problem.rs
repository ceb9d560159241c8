//! Example defaults and construction of the system / target / candidate.

use anyhow::{Context, Result};
use restraint_core::lyapunov::{check_weak_petrov, BandSpec, CandidateMrf, ModulusParams, PetrovReport, PetrovSpec};
use restraint_core::oracle::examples::{
    lookup, petrov_demo_rate, power_law_exponent, power_law_mrf, power_law_system, spiral_mrf, spiral_system,
    spiral_target,
};
use restraint_core::{ControlSystem, TargetSet, UniformGrid};

use crate::config::RunConfig;

/// Every grid and band setting with the example defaults applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub key: String,
    pub starts: Vec<Vec<f64>>,
    pub verify_lower: Vec<f64>,
    pub verify_upper: Vec<f64>,
    pub verify_spacing: f64,
    pub band: BandSpec,
    pub modulus: ModulusParams,
    pub oracle_lower: Vec<f64>,
    pub oracle_upper: Vec<f64>,
    pub oracle_spacing: f64,
    pub oracle_tol: f64,
    pub collar: Option<f64>,
}

struct Defaults {
    half_width: f64,
    spacing: f64,
    delta: f64,
    sigma: Option<f64>,
    start: Vec<f64>,
    oracle_spacing: f64,
    collar: Option<f64>,
}

fn example_defaults(cfg: &RunConfig) -> Defaults {
    let ex = &cfg.example;
    match ex.key.as_str() {
        "power_law" => {
            let (r, s) = (ex.r.unwrap_or(0.0), ex.s.unwrap_or(1.0));
            let (m1, m2) = (ex.m1.unwrap_or(1.0), ex.m2.unwrap_or(1.0));
            let q = power_law_exponent(r, s);
            Defaults {
                half_width: 2.0,
                spacing: 1e-3,
                delta: 1e-4,
                sigma: (q > 0.0).then(|| 0.75 * m2 / (m1 * q) * 2f64.powf(q)),
                start: vec![1.0],
                oracle_spacing: 0.01,
                collar: None,
            }
        }
        "spiral" => Defaults {
            half_width: 4.0,
            spacing: 0.01,
            delta: 0.05,
            sigma: None,
            start: vec![0.0, 3.5],
            oracle_spacing: 0.05,
            collar: Some(0.2),
        },
        "petrov_demo" => Defaults {
            half_width: 1.0,
            spacing: 5e-3,
            delta: 1e-2,
            sigma: Some(1.9 * ex.petrov_delta.unwrap_or(1.0).sqrt()),
            start: vec![0.5],
            oracle_spacing: 0.01,
            collar: None,
        },
        _ => Defaults {
            half_width: 2.0,
            spacing: 0.01,
            delta: 1e-4,
            sigma: Some(1.5),
            start: vec![1.0],
            oracle_spacing: 0.01,
            collar: None,
        },
    }
}

impl Resolved {
    /// Assumes `cfg` passed validation.
    pub fn new(cfg: &RunConfig) -> Self {
        let d = example_defaults(cfg);
        let dim = lookup(&cfg.example.key).map_or(1, |e| e.state_dim);
        let v = &cfg.verify;
        let o = &cfg.oracle;
        let oracle_spacing = o.spacing.unwrap_or(d.oracle_spacing);
        let band_default = BandSpec::default();
        Self {
            key: cfg.example.key.clone(),
            starts: cfg.starts.clone().unwrap_or_else(|| vec![d.start.clone()]),
            verify_lower: v.lower.clone().unwrap_or_else(|| vec![-d.half_width; dim]),
            verify_upper: v.upper.clone().unwrap_or_else(|| vec![d.half_width; dim]),
            verify_spacing: v.spacing.unwrap_or(d.spacing),
            band: BandSpec {
                delta: v.delta.unwrap_or(d.delta),
                sigma: v.sigma.or(d.sigma),
                levels: v.levels.unwrap_or(band_default.levels),
                margin: v.margin.unwrap_or(band_default.margin),
                ..band_default
            },
            modulus: ModulusParams {
                eta: v.eta.unwrap_or(ModulusParams::default().eta),
                ..Default::default()
            },
            oracle_lower: o.lower.clone().unwrap_or_else(|| vec![-d.half_width; dim]),
            oracle_upper: o.upper.clone().unwrap_or_else(|| vec![d.half_width; dim]),
            oracle_spacing,
            oracle_tol: o.oracle_tol.unwrap_or(2.0 * (cfg.hjb.h + oracle_spacing)),
            collar: o.collar.or(d.collar),
        }
    }

    pub fn verify_grid(&self) -> Result<UniformGrid> {
        Ok(UniformGrid::with_spacing(
            self.verify_lower.clone(),
            self.verify_upper.clone(),
            self.verify_spacing,
        )?)
    }

    pub fn oracle_grid(&self) -> Result<UniformGrid> {
        Ok(UniformGrid::with_spacing(
            self.oracle_lower.clone(),
            self.oracle_upper.clone(),
            self.oracle_spacing,
        )?)
    }
}

pub struct Problem {
    pub system: ControlSystem,
    pub target: TargetSet,
    pub mrf: CandidateMrf,
    /// Set for `petrov_demo`, whose candidate is induced by the rate.
    pub petrov: Option<PetrovReport>,
}

impl Problem {
    pub fn build(cfg: &RunConfig, resolved: &Resolved) -> Result<Self> {
        let ex = &cfg.example;
        let p0 = ex.p0_bar;
        let origin = || TargetSet::point(vec![0.0]);
        Ok(match ex.key.as_str() {
            "power_law" => {
                let (r, s) = (ex.r.unwrap_or(0.0), ex.s.unwrap_or(1.0));
                let (m1, m2) = (ex.m1.unwrap_or(1.0), ex.m2.unwrap_or(1.0));
                Self {
                    system: power_law_system(r, s, m1, m2),
                    target: origin(),
                    mrf: power_law_mrf(r, s, m1, m2, p0),
                    petrov: None,
                }
            }
            "spiral" => {
                let k = ex.k.unwrap_or(1.0);
                Self {
                    system: spiral_system(k),
                    target: spiral_target(),
                    mrf: spiral_mrf(ex.epsilon.unwrap_or(0.5), p0),
                    petrov: None,
                }
            }
            "petrov_demo" => {
                let system = power_law_system(0.0, 0.0, 1.0, 1.0);
                let target = origin();
                let spec = PetrovSpec {
                    delta: ex.petrov_delta.unwrap_or(1.0),
                    p0_bar: p0,
                    ..Default::default()
                };
                let (report, mrf) =
                    check_weak_petrov(&system, &target, petrov_demo_rate(), &spec, &resolved.verify_grid()?)
                        .context("weak Petrov check")?;
                Self {
                    system,
                    target,
                    mrf,
                    petrov: Some(report),
                }
            }
            _ => Self {
                system: power_law_system(0.0, 0.0, 1.0, 1.0),
                target: origin(),
                mrf: power_law_mrf(0.0, 0.0, 1.0, 1.0, p0),
                petrov: None,
            },
        })
    }
}
