//! Frequency axes shared by every network and spectrum.

use crate::error::{Error, Result};

/// Strictly increasing list of positive frequencies in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        for (i, &f) in points.iter().enumerate() {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "point {i} = {f} Hz is not a positive finite frequency"
                )));
            }
            if i > 0 && f <= points[i - 1] {
                return Err(Error::InvalidGrid(format!(
                    "point {i} = {f} Hz does not exceed the previous point {} Hz",
                    points[i - 1]
                )));
            }
        }
        Ok(Self { points })
    }

    /// Uniform grid `start, start + step, ...` up to and including `stop`
    /// (with a half-step tolerance on the last point).
    pub fn linspace_step(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop > start) {
            return Err(Error::InvalidGrid(format!(
                "need start < stop and step > 0 (got {start}, {stop}, {step})"
            )));
        }
        let n = ((stop - start) / step + 0.5).floor() as usize + 1;
        Self::new((0..n).map(|i| start + i as f64 * step).collect())
    }

    /// `n` evenly spaced points from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Self> {
        match n {
            0 => Err(Error::InvalidGrid("grid is empty".into())),
            1 => Self::new(vec![start]),
            _ => {
                let step = (stop - start) / (n - 1) as f64;
                Self::new((0..n).map(|i| start + i as f64 * step).collect())
            }
        }
    }

    pub fn single(f: f64) -> Result<Self> {
        Self::new(vec![f])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }

    pub fn contains_range(&self, other: &FrequencyGrid) -> bool {
        other.first() >= self.first() && other.last() <= self.last()
    }
}

impl std::ops::Index<usize> for FrequencyGrid {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.points[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![2.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn step_grid_includes_stop() {
        let g = FrequencyGrid::linspace_step(4e9, 11e9, 10e6).unwrap();
        assert_eq!(g.len(), 701);
        assert_eq!(g.first(), 4e9);
        assert!((g.last() - 11e9).abs() < 1.0);
    }
}
