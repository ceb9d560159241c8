use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the level-by-level trajectory construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    /// Slack `eps` in the per-step decrease `U(zeta(s)) - U(x^j) <= -(s - s^{j-1}) / (eps + 1)`.
    pub epsilon: f64,
    /// Levels `mu_k = nu_ratio^k U(x)`.
    pub nu_ratio: f64,
    pub max_levels: usize,
    /// Upper cap on the leg step in the reparameterized variable `s`.
    pub delta_init: f64,
    /// RK4 substeps per leg step.
    pub substeps: usize,
    /// Stop once `d(x) < d_tol`.
    pub d_tol: f64,
    /// Level crossing tolerance relative to the target level.
    pub level_tol_rel: f64,
    /// Step halving gives up below `min_step_rel * delta_init`.
    pub min_step_rel: f64,
    pub max_steps_per_leg: usize,
    /// Relative tolerance of the finite-difference ODE residual audit.
    pub residual_tol: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            nu_ratio: 0.5,
            max_levels: 20,
            delta_init: 0.05,
            substeps: 16,
            d_tol: 1e-3,
            level_tol_rel: 1e-8,
            min_step_rel: 1e-9,
            max_steps_per_leg: 200_000,
            residual_tol: 1e-3,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.nu_ratio > 0.0 && self.nu_ratio < 1.0) {
            return bad("nu_ratio must lie in ]0, 1[");
        }
        if self.max_levels == 0 {
            return bad("max_levels must be at least 1");
        }
        if !(self.delta_init > 0.0) {
            return bad("delta_init must be positive");
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if !(self.d_tol >= 0.0) {
            return bad("d_tol must be non-negative");
        }
        if !(self.level_tol_rel > 0.0 && self.level_tol_rel < 1.0) {
            return bad("level_tol_rel must lie in ]0, 1[");
        }
        if !(self.min_step_rel > 0.0 && self.min_step_rel < 1.0) {
            return bad("min_step_rel must lie in ]0, 1[");
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        Ok(())
    }

    /// `nu_k = nu_ratio^k`: `1 = nu_0 > nu_1 > ... -> 0`.
    pub fn nu(&self, k: usize) -> f64 {
        self.nu_ratio.powi(k as i32)
    }

    pub fn min_step(&self) -> f64 {
        self.min_step_rel * self.delta_init
    }
}
