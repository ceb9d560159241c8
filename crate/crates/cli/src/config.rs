//! Run configuration: one TOML file, every section optional except
//! `[example]`, unset fields filled from the example's defaults.

use anyhow::{bail, Context, Result};
use restraint_core::oracle::examples::lookup;
use restraint_core::oracle::HjbConfig;
use restraint_core::SynthesisConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Initial states for `synthesize`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<Vec<f64>>>,
    pub example: ExampleSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub kl: KlSection,
    #[serde(default)]
    pub hjb: HjbConfig,
    #[serde(default)]
    pub oracle: OracleSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSection {
    /// One of `minimum_time_1d`, `power_law`, `spiral`, `petrov_demo`.
    pub key: String,
    pub p0_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<f64>,
    /// Running cost weight of the spiral system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// `eps` of the spiral candidate `U_eps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Radius of the weak Petrov neighbourhood.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub petrov_delta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KlSection {
    /// Lipschitz bound of `U` for the envelope grid correction; estimated
    /// from the band report when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    pub levels: usize,
    pub min_ratio: f64,
    pub sandwich_samples: usize,
    pub tol: f64,
}

impl Default for KlSection {
    fn default() -> Self {
        Self {
            lipschitz: None,
            levels: 64,
            min_ratio: 1e-6,
            sandwich_samples: 2000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_tol: Option<f64>,
    /// Width of the excluded collar around the spiral's inner circle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collar: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let Some(spec) = lookup(&self.example.key) else {
            bail!(
                "example.key = {:?} is not a built-in example (minimum_time_1d, power_law, spiral, petrov_demo)",
                self.example.key
            );
        };
        if !(self.example.p0_bar >= 0.0 && self.example.p0_bar.is_finite()) {
            bail!("example.p0_bar = {} must be a non-negative number", self.example.p0_bar);
        }
        let dim = spec.state_dim;
        for (name, v) in [
            ("verify.lower", &self.verify.lower),
            ("verify.upper", &self.verify.upper),
            ("oracle.lower", &self.oracle.lower),
            ("oracle.upper", &self.oracle.upper),
        ] {
            if let Some(v) = v {
                if v.len() != dim {
                    bail!("{name} has {} entries, the example has dimension {dim}", v.len());
                }
            }
        }
        if let Some(starts) = &self.starts {
            if let Some(bad) = starts.iter().find(|x| x.len() != dim) {
                bail!("start {bad:?} does not have dimension {dim}");
            }
        }
        self.synthesis.validate()?;
        Ok(())
    }

    /// Defaults shown by `--print-defaults`: the minimum-time example with
    /// every field spelled out.
    pub fn defaults() -> Self {
        let mut cfg = Self {
            seed: 0,
            starts: None,
            example: ExampleSection {
                key: "minimum_time_1d".into(),
                p0_bar: 0.9,
                r: None,
                s: None,
                m1: None,
                m2: None,
                k: None,
                epsilon: None,
                petrov_delta: None,
            },
            verify: VerifySection::default(),
            synthesis: SynthesisConfig::default(),
            kl: KlSection::default(),
            hjb: HjbConfig::default(),
            oracle: OracleSection::default(),
        };
        let r = crate::problem::Resolved::new(&cfg);
        cfg.starts = Some(r.starts.clone());
        cfg.verify = VerifySection {
            lower: Some(r.verify_lower.clone()),
            upper: Some(r.verify_upper.clone()),
            spacing: Some(r.verify_spacing),
            delta: Some(r.band.delta),
            sigma: r.band.sigma,
            levels: Some(r.band.levels),
            margin: Some(r.band.margin),
            eta: Some(r.modulus.eta),
        };
        cfg.oracle = OracleSection {
            lower: Some(r.oracle_lower.clone()),
            upper: Some(r.oracle_upper.clone()),
            spacing: Some(r.oracle_spacing),
            oracle_tol: Some(r.oracle_tol),
            collar: None,
        };
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::defaults();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_p0_is_rejected() {
        let err = RunConfig::parse("[example]\nkey = \"minimum_time_1d\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("p0_bar"));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = RunConfig::parse("[example]\nkey = \"spiral\"\np0_bar = 1.0\nfoo = 2\n").unwrap_err();
        assert!(format!("{err:#}").contains("foo"));
    }

    #[test]
    fn unknown_example_is_rejected() {
        assert!(RunConfig::parse("[example]\nkey = \"pendulum\"\np0_bar = 1.0\n").is_err());
    }
}
