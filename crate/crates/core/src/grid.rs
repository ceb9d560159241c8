//! Uniform tensor grids over an axis-aligned box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl UniformGrid {
    /// Grid with `counts[i]` nodes on axis `i`, endpoints included.
    pub fn with_counts(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != counts.len() {
            return Err(Error::Config(format!(
                "grid bounds/counts dimension mismatch: {} / {} / {}",
                lower.len(),
                upper.len(),
                counts.len()
            )));
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::Config(format!(
                    "grid axis {i}: lower {} must be below upper {}",
                    lower[i], upper[i]
                )));
            }
            if counts[i] < 2 {
                return Err(Error::Config(format!("grid axis {i}: need at least 2 nodes")));
            }
        }
        Ok(Self { lower, upper, counts })
    }

    /// Grid whose spacing is as close as possible to `spacing` on every axis.
    pub fn with_spacing(lower: Vec<f64>, upper: Vec<f64>, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Config(format!("grid spacing {spacing} must be positive")));
        }
        let counts = lower
            .iter()
            .zip(&upper)
            .map(|(lo, hi)| ((hi - lo) / spacing).round().max(1.0) as usize + 1)
            .collect();
        Self::with_counts(lower, upper, counts)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(0.0, f64::max)
    }

    /// Multi-index of a flat index; axis 0 varies fastest.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let i = flat % n;
                flat /= n;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut flat = 0;
        for axis in (0..self.dim()).rev() {
            flat = flat * self.counts[axis] + multi[axis];
        }
        flat
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let n = self.counts[axis] - 1;
        if i == n {
            self.upper[axis]
        } else {
            self.lower[axis] + (self.upper[axis] - self.lower[axis]) * i as f64 / n as f64
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coordinate(axis, i))
            .collect()
    }

    /// True when the node lies on the outer layer of the box.
    pub fn is_boundary(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .zip(&self.counts)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_points() {
        let g = UniformGrid::with_spacing(vec![-2.0], vec![2.0], 0.01).unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g.point(200), vec![0.0]);
        assert_eq!(g.point(400), vec![2.0]);
        assert!(g.is_boundary(0) && g.is_boundary(400) && !g.is_boundary(3));
    }

    #[test]
    fn flat_roundtrip_2d() {
        let g = UniformGrid::with_counts(vec![0.0, 0.0], vec![1.0, 2.0], vec![3, 5]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.point(g.flat_index(&[2, 4])), vec![1.0, 2.0]);
        assert_eq!(g.spacing(1), 0.5);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(UniformGrid::with_counts(vec![1.0], vec![0.0], vec![3]).is_err());
        assert!(UniformGrid::with_counts(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(UniformGrid::with_spacing(vec![0.0], vec![1.0], 0.0).is_err());
    }
}
