//! Trajectory synthesis from a verified MRF: feedback selection, leg
//! integration, time reparameterization, cost and decay certificates.

pub mod audit;
pub mod config;
pub mod feedback;
pub mod kl;
pub mod leg;
pub mod reparam;
pub mod synthesize;

pub use audit::{audit_synthesis, Check, LegAudit, SynthesisAudit};
pub use config::SynthesisConfig;
pub use feedback::{denominator, feedback_select, FeedbackChoice};
pub use kl::{
    audit_envelopes, build_sigma_envelopes, check_kl_axioms, verify_kl, EnvelopeParams, KlAudit, KlAxioms, KlBound,
    SandwichAudit, SigmaEnvelopes,
};
pub use leg::{cutoff, integrate_leg, reparameterized_field, LegEnd, LegResult, LegSample};
pub use reparam::{reparam_to_time, TimedLeg};
pub use synthesize::{synthesize, LegRecord, Synthesis};
