use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::ScalarField;

pub type Region = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type GradientField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// One smooth branch of a piecewise-smooth candidate.
#[derive(Clone)]
pub struct SmoothPiece {
    pub region: Region,
    pub value: ScalarField,
    pub gradient: GradientField,
}

impl SmoothPiece {
    pub fn new<R, V, G>(region: R, value: V, gradient: G) -> Self
    where
        R: Fn(&[f64]) -> bool + Send + Sync + 'static,
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            region: Arc::new(region),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }
}

/// Lipschitz and semiconcavity constants on a level band `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandConstants {
    pub lo: f64,
    pub hi: f64,
    pub lipschitz: f64,
    pub semiconcavity: f64,
}

/// Candidate Minimum Restraint Function: value, limiting gradients via
/// smooth pieces, and the cost multiplier `p0_bar`.
#[derive(Clone)]
pub struct CandidateMrf {
    name: String,
    value: ScalarField,
    pieces: Vec<SmoothPiece>,
    p0_bar: f64,
    act_tol: f64,
    band_constants: Vec<BandConstants>,
}

impl fmt::Debug for CandidateMrf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateMrf")
            .field("name", &self.name)
            .field("pieces", &self.pieces.len())
            .field("p0_bar", &self.p0_bar)
            .field("act_tol", &self.act_tol)
            .finish_non_exhaustive()
    }
}

pub const DEFAULT_ACT_TOL: f64 = 1e-9;

impl CandidateMrf {
    pub fn new<V>(name: impl Into<String>, value: V, pieces: Vec<SmoothPiece>, p0_bar: f64) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            pieces,
            p0_bar,
            act_tol: DEFAULT_ACT_TOL,
            band_constants: Vec::new(),
        }
    }

    /// A candidate that is smooth wherever it is evaluated.
    pub fn smooth<V, G>(name: impl Into<String>, value: V, gradient: G, p0_bar: f64) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let value: ScalarField = Arc::new(value);
        let piece = SmoothPiece {
            region: Arc::new(|_: &[f64]| true),
            value: value.clone(),
            gradient: Arc::new(gradient),
        };
        Self {
            name: name.into(),
            value,
            pieces: vec![piece],
            p0_bar,
            act_tol: DEFAULT_ACT_TOL,
            band_constants: Vec::new(),
        }
    }

    pub fn with_act_tol(mut self, act_tol: f64) -> Self {
        self.act_tol = act_tol;
        self
    }

    pub fn with_p0_bar(mut self, p0_bar: f64) -> Self {
        self.p0_bar = p0_bar;
        self
    }

    /// Supplied per-band constants; verification estimates them otherwise.
    pub fn with_band_constants(mut self, constants: Vec<BandConstants>) -> Self {
        self.band_constants = constants;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p0_bar(&self) -> f64 {
        self.p0_bar
    }

    pub fn act_tol(&self) -> f64 {
        self.act_tol
    }

    pub fn band_constants(&self) -> &[BandConstants] {
        &self.band_constants
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn active<'a>(&'a self, x: &'a [f64], u: f64) -> impl Iterator<Item = &'a SmoothPiece> + 'a {
        let tol = self.act_tol;
        self.pieces
            .iter()
            .filter(move |p| (p.region)(x) && ((p.value)(x) - u).abs() <= tol)
    }

    /// Number of smooth pieces active at `x`.
    pub fn active_count(&self, x: &[f64]) -> usize {
        let u = self.value(x);
        self.active(x, u).count()
    }

    /// Limiting gradients: the gradients of every active piece.
    pub fn limiting_gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let u = self.value(x);
        let grads: Vec<Vec<f64>> = self.active(x, u).map(|p| (p.gradient)(x)).collect();
        if grads.is_empty() {
            return Err(Error::NoActivePiece { x: x.to_vec() });
        }
        Ok(grads)
    }

    /// Gradient at a point where exactly one piece is active, `None` elsewhere.
    pub fn smooth_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let u = self.value(x);
        let mut it = self.active(x, u);
        let first = it.next()?;
        if it.next().is_some() {
            return None;
        }
        Some((first.gradient)(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::examples::spiral_mrf;

    #[test]
    fn spiral_candidate_is_nonsmooth_at_its_maximum() {
        let u = spiral_mrf(0.5, 1.0);
        assert_eq!(u.active_count(&[2.0, 0.0]), 2);
        assert_eq!(u.active_count(&[0.0, 2.5]), 1);
        let g = u.limiting_gradients(&[2.0, 0.0]).unwrap();
        assert!(g.iter().any(|p| (p[0] - 1.0).abs() < 1e-12));
        assert!(g.iter().any(|p| (p[0] + 1.5).abs() < 1e-12));
        assert!(u.smooth_gradient(&[2.0, 0.0]).is_none());
    }

    #[test]
    fn smooth_candidate_gradient_matches_finite_difference() {
        let u = spiral_mrf(0.5, 1.0);
        for x in [[1.3, 0.4], [0.0, -2.6], [-3.5, 0.1], [2.2, 0.3]] {
            let g = u.smooth_gradient(&x).unwrap();
            for axis in 0..2 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[axis] += h;
                xm[axis] -= h;
                let fd = (u.value(&xp) - u.value(&xm)) / (2.0 * h);
                assert!((fd - g[axis]).abs() < 1e-6, "x = {x:?}");
            }
        }
    }

    #[test]
    fn no_active_piece_is_an_error() {
        let u = CandidateMrf::new(
            "gap",
            |x: &[f64]| x[0].abs(),
            vec![SmoothPiece::new(
                |x: &[f64]| x[0] > 0.0,
                |x: &[f64]| x[0],
                |_: &[f64]| vec![1.0],
            )],
            1.0,
        );
        assert!(matches!(
            u.limiting_gradients(&[-1.0]),
            Err(Error::NoActivePiece { .. })
        ));
    }
}
