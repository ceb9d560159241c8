//! Candidate Minimum Restraint Functions and their certificates.

mod band;
mod modulus;
mod mrf;
mod petrov;
mod supersolution;

pub use band::{
    band_levels, verify_mrf_band, BandReport, BandSpec, LevelSample, PositiveDefiniteness, Properness, Verdict,
    Violation, MAX_REPORTED,
};
pub use modulus::{build_decrease_modulus, DecreaseModulus, ModulusParams};
pub use mrf::{BandConstants, CandidateMrf, GradientField, Region, SmoothPiece, DEFAULT_ACT_TOL};
pub use petrov::{
    check_petrov_inequality, check_weak_petrov, induced_mrf, integrability, Integrability, PetrovPotential,
    PetrovReport, PetrovSpec, RateFunction,
};
pub use supersolution::{check_supersolution, MarginFailure, SupersolutionReport};
