//! Strictly increasing piecewise-linear functions on `[0, +inf[`.
//!
//! Every monotone ingredient of the decay certificate (decrease modulus,
//! distance envelopes, `min{r, m(r)}`) is stored in this form so that both
//! evaluation and inversion are exact on the knots and cheap in between.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strictly increasing piecewise-linear map with `f(0) = 0`, extended
/// linearly beyond its last knot with `tail_slope`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonePwl {
    knots: Vec<(f64, f64)>,
    tail_slope: f64,
}

impl MonotonePwl {
    pub fn new(knots: Vec<(f64, f64)>, tail_slope: f64) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::NotInvertible("need at least two knots".into()));
        }
        if knots[0] != (0.0, 0.0) {
            return Err(Error::NotInvertible(format!(
                "first knot must be (0, 0), got {:?}",
                knots[0]
            )));
        }
        for w in knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if !(x1.is_finite() && y1.is_finite()) {
                return Err(Error::NotInvertible(format!("non-finite knot ({x1}, {y1})")));
            }
            if x1 <= x0 || y1 <= y0 {
                return Err(Error::NotInvertible(format!(
                    "knots not strictly increasing: ({x0}, {y0}) -> ({x1}, {y1})"
                )));
            }
        }
        if !(tail_slope > 0.0 && tail_slope.is_finite()) {
            return Err(Error::NotInvertible(format!(
                "tail slope {tail_slope} must be positive"
            )));
        }
        Ok(Self { knots, tail_slope })
    }

    /// The identity map `r -> r`.
    pub fn identity() -> Self {
        Self {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
            tail_slope: 1.0,
        }
    }

    /// `r -> factor * r`.
    pub fn linear(factor: f64) -> Result<Self> {
        Self::new(vec![(0.0, 0.0), (1.0, factor)], factor)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    pub fn last_knot(&self) -> (f64, f64) {
        *self.knots.last().expect("at least two knots")
    }

    /// Smallest slope over all segments, tail included.
    pub fn min_slope(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(self.tail_slope, f64::min)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let (xl, yl) = self.last_knot();
        if r >= xl {
            return yl + self.tail_slope * (r - xl);
        }
        // first knot with x > r; r > 0 so idx >= 1
        let idx = self.knots.partition_point(|&(x, _)| x <= r);
        let (x0, y0) = self.knots[idx - 1];
        let (x1, y1) = self.knots[idx];
        y0 + (y1 - y0) * (r - x0) / (x1 - x0)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let (xl, yl) = self.last_knot();
        if y >= yl {
            return xl + (y - yl) / self.tail_slope;
        }
        let idx = self.knots.partition_point(|&(_, v)| v <= y);
        let (x0, y0) = self.knots[idx - 1];
        let (x1, y1) = self.knots[idx];
        x0 + (x1 - x0) * (y - y0) / (y1 - y0)
    }

    /// Pointwise `min{r, f(r)}`, again strictly increasing.
    pub fn min_with_identity(&self) -> Self {
        let mut out: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        let push = |out: &mut Vec<(f64, f64)>, p: (f64, f64)| {
            if p.0 > out.last().unwrap().0 {
                out.push(p);
            }
        };
        for w in self.knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let (e0, e1) = (y0 - x0, y1 - x1);
            if (e0 < 0.0 && e1 > 0.0) || (e0 > 0.0 && e1 < 0.0) {
                let xc = x0 + (x1 - x0) * e0 / (e0 - e1);
                push(&mut out, (xc, xc));
            }
            push(&mut out, (x1, y1.min(x1)));
        }
        let (xl, yl) = self.last_knot();
        let s = self.tail_slope;
        let tail = if yl < xl {
            if s > 1.0 {
                let xc = xl + (xl - yl) / (s - 1.0);
                push(&mut out, (xc, xc));
                1.0
            } else {
                s
            }
        } else if s < 1.0 {
            if yl > xl {
                let xc = xl + (yl - xl) / (1.0 - s);
                push(&mut out, (xc, xc));
            }
            s
        } else {
            1.0
        };
        if out.len() < 2 {
            out.push((1.0, self.eval(1.0).min(1.0)));
        }
        Self {
            knots: out,
            tail_slope: tail,
        }
    }
}

/// Next representable value above `v` (finite `v`).
fn step_up(v: f64) -> f64 {
    if v == 0.0 {
        f64::from_bits(1)
    } else if v > 0.0 {
        f64::from_bits(v.to_bits() + 1)
    } else {
        f64::from_bits(v.to_bits() - 1)
    }
}

fn step_down(v: f64) -> f64 {
    -step_up(-v)
}

/// Largest values `v_i <= targets_i` such that `v` increases with slope at
/// least `floor` between consecutive abscissae (backward sweep from the top).
pub fn strict_minorant(xs: &[f64], targets: &[f64], floor: f64) -> Vec<f64> {
    let n = xs.len();
    let mut v = targets.to_vec();
    for i in (0..n.saturating_sub(1)).rev() {
        let cap = (v[i + 1] - floor * (xs[i + 1] - xs[i])).min(step_down(v[i + 1]));
        if v[i] > cap {
            v[i] = cap;
        }
    }
    v
}

/// Smallest values `v_i >= targets_i` increasing with slope at least `floor`
/// (forward sweep from the bottom).
pub fn strict_majorant(xs: &[f64], targets: &[f64], floor: f64) -> Vec<f64> {
    let mut v = targets.to_vec();
    for i in 1..xs.len() {
        let cap = (v[i - 1] + floor * (xs[i] - xs[i - 1])).max(step_up(v[i - 1]));
        if v[i] < cap {
            v[i] = cap;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_flat_segment() {
        assert!(MonotonePwl::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)], 1.0).is_err());
        assert!(MonotonePwl::new(vec![(0.0, 0.1), (1.0, 1.0)], 1.0).is_err());
        assert!(MonotonePwl::new(vec![(0.0, 0.0), (1.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn eval_and_inverse_on_knots() {
        let f = MonotonePwl::new(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)], 0.5).unwrap();
        assert_eq!(f.eval(1.0), 2.0);
        assert_eq!(f.eval(2.0), 2.5);
        assert_eq!(f.eval(5.0), 4.0);
        assert_eq!(f.inverse(2.5), 2.0);
        assert_eq!(f.inverse(4.0), 5.0);
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.min_slope(), 0.5);
    }

    #[test]
    fn min_with_identity_crossings() {
        // crosses the diagonal inside a segment and again on the tail
        let f = MonotonePwl::new(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 2.5)], 0.25).unwrap();
        let g = f.min_with_identity();
        for i in 0..=400 {
            let r = i as f64 * 0.01;
            assert!((g.eval(r) - r.min(f.eval(r))).abs() < 1e-12, "r = {r}");
        }
        assert_eq!(g.tail_slope(), 0.25);
    }

    #[test]
    fn minorant_respects_targets_and_floor() {
        let xs = [0.1, 0.5, 1.0];
        let v = strict_minorant(&xs, &[0.45, 0.45, 0.45], 0.01);
        assert!(v.iter().zip([0.45; 3]).all(|(a, b)| *a <= b));
        assert!(v[0] < v[1] && v[1] < v[2]);
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(
            incs in proptest::collection::vec((0.01f64..2.0, 0.01f64..2.0), 1..12),
            tail in 0.01f64..3.0,
            r in 0.0f64..30.0,
        ) {
            let mut knots = vec![(0.0, 0.0)];
            for (dx, dy) in incs {
                let (x, y) = *knots.last().unwrap();
                knots.push((x + dx, y + dy));
            }
            let f = MonotonePwl::new(knots, tail).unwrap();
            let y = f.eval(r);
            prop_assert!((f.inverse(y) - r).abs() <= 1e-9 * (1.0 + r));
            let g = f.min_with_identity();
            prop_assert!((g.eval(r) - r.min(y)).abs() <= 1e-9 * (1.0 + r));
        }
    }
}
