use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwl::{strict_minorant, MonotonePwl};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusParams {
    /// Safety factor: `m(level_i) <= (1 - eta) * m_hat(level_i)`.
    pub eta: f64,
    /// Requested minimum slope; lowered automatically when the samples are
    /// too small to afford it.
    pub slope_floor: f64,
}

impl Default for ModulusParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            slope_floor: 1e-6,
        }
    }
}

/// Strictly increasing piecewise-linear decrease modulus `m` with `m(0) = 0`.
///
/// `range` is the level interval backed by Hamiltonian samples; outside it
/// the function is an uncertified extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecreaseModulus {
    function: MonotonePwl,
    slope_floor: f64,
    range: (f64, f64),
}

impl DecreaseModulus {
    /// Wraps hand-made knots; the first knot must be `(0, 0)`.
    pub fn from_knots(knots: Vec<(f64, f64)>, slope_floor: f64) -> Result<Self> {
        let range = (knots.get(1).map_or(0.0, |k| k.0), knots.last().map_or(0.0, |k| k.0));
        let function = MonotonePwl::new(knots, slope_floor).map_err(|e| Error::Modulus(e.to_string()))?;
        Ok(Self {
            function,
            slope_floor,
            range,
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.function.eval(r)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        self.function.inverse(y)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        self.function.knots()
    }

    pub fn slope_floor(&self) -> f64 {
        self.slope_floor
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn function(&self) -> &MonotonePwl {
        &self.function
    }
}

/// Piecewise-linear strict minorant of sampled `m_hat`.
///
/// `m_hat` is non-decreasing, so on `[level_{i-1}, level_i[` it is bounded
/// below by `m_hat(level_{i-1})`; the knot at `level_i` is therefore capped
/// by `(1 - eta) * m_hat(level_{i-1})`, which keeps the linear interpolant
/// below `(1 - eta) * m_hat` everywhere in the sampled range.
pub fn build_decrease_modulus(samples: &[(f64, f64)], params: &ModulusParams) -> Result<DecreaseModulus> {
    if samples.is_empty() {
        return Err(Error::Modulus("no m_hat samples".into()));
    }
    if !(params.eta > 0.0 && params.eta < 1.0) {
        return Err(Error::Modulus(format!("eta = {} must lie in ]0, 1[", params.eta)));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.dedup_by(|b, a| a.0 == b.0);
    if let Some(bad) = sorted.iter().find(|s| !(s.1 > 0.0) || !(s.0 > 0.0)) {
        return Err(Error::Modulus(format!(
            "m_hat({}) = {} is not positive; the band certificate failed",
            bad.0, bad.1
        )));
    }
    if let Some(w) = sorted.windows(2).find(|w| w[1].1 < w[0].1 * (1.0 - 1e-12)) {
        return Err(Error::Modulus(format!(
            "m_hat decreases from {} at {} to {} at {}",
            w[0].1, w[0].0, w[1].1, w[1].0
        )));
    }
    let keep = 1.0 - params.eta;
    let xs: Vec<f64> = sorted.iter().map(|s| s.0).collect();
    let targets: Vec<f64> = (0..sorted.len())
        .map(|i| keep * sorted[i.saturating_sub(1)].1)
        .collect();
    let top = *xs.last().unwrap();
    let floor = params.slope_floor.min(0.5 * params.eta * targets[0] / top);
    let values = strict_minorant(&xs, &targets, floor);
    let mut knots = vec![(0.0, 0.0)];
    knots.extend(xs.iter().copied().zip(values));
    let function = MonotonePwl::new(knots, floor).map_err(|e| Error::Modulus(e.to_string()))?;
    Ok(DecreaseModulus {
        function,
        slope_floor: floor,
        range: (xs[0], top),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strictly_increasing(m: &DecreaseModulus) -> bool {
        m.knots().windows(2).all(|w| w[1].1 > w[0].1 && w[1].0 > w[0].0)
    }

    #[test]
    fn constant_samples() {
        let samples: Vec<(f64, f64)> = (1..=10).map(|i| (0.1 * i as f64, 0.5)).collect();
        let m = build_decrease_modulus(&samples, &ModulusParams::default()).unwrap();
        assert!(m.eval(1.0) <= 0.45 + 1e-15);
        assert!(m.eval(1.0) > 0.44);
        assert_eq!(m.eval(0.0), 0.0);
        assert!(strictly_increasing(&m));
        for (r, mh) in samples {
            assert!(m.eval(r) <= 0.9 * mh + 1e-15);
        }
    }

    #[test]
    fn single_sample_is_a_ramp() {
        let m = build_decrease_modulus(&[(2.0, 1.0)], &ModulusParams::default()).unwrap();
        assert_eq!(m.knots(), &[(0.0, 0.0), (2.0, 0.9)]);
        assert!((m.eval(1.0) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn two_samples() {
        let m = build_decrease_modulus(&[(1.0, 0.3), (0.1, 0.2)], &ModulusParams::default()).unwrap();
        assert!(m.eval(0.1) <= 0.18 + 1e-15);
        assert!(m.eval(1.0) <= 0.27);
        assert!(m.eval(0.1) < m.eval(1.0));
        assert!(strictly_increasing(&m));
        assert_eq!(m.range(), (0.1, 1.0));
    }

    #[test]
    fn rejects_nonpositive_samples() {
        assert!(matches!(
            build_decrease_modulus(&[(0.1, 0.2), (1.0, 0.0)], &ModulusParams::default()),
            Err(Error::Modulus(_))
        ));
        assert!(build_decrease_modulus(&[], &ModulusParams::default()).is_err());
    }

    #[test]
    fn from_knots_validates() {
        assert!(DecreaseModulus::from_knots(vec![(0.0, 0.0), (1.0, 0.4), (2.0, 0.4)], 1e-6).is_err());
        let m = DecreaseModulus::from_knots(vec![(0.0, 0.0), (1.0, 0.4), (2.0, 0.5)], 1e-6).unwrap();
        assert_eq!(m.eval(1.0), 0.4);
        assert_eq!(m.range(), (1.0, 2.0));
    }
}
