//! Search-space geometry and observation bookkeeping.
//!
//! Models work in the unit cube; [`SearchSpace::normalize`] and
//! [`SearchSpace::denormalize`] map between user coordinates and that frame.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned continuous domain with strictly ordered bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (dim, &(lower, upper)) in bounds.iter().enumerate() {
            // `!(a < b)` also rejects NaN bounds.
            if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                return Err(Error::InvalidBounds { dim, lower, upper });
            }
        }
        Ok(Self { lower: bounds.iter().map(|b| b.0).collect(), upper: bounds.iter().map(|b| b.1).collect() })
    }

    /// The d-dimensional unit cube.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(&alloc::vec![(0.0, 1.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        for (dim, &x) in point.iter().enumerate() {
            if !(x >= self.lower[dim] && x <= self.upper[dim]) {
                return Err(Error::OutOfBounds { dim });
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.check_point(point).is_ok()
    }

    pub fn normalize(&self, point: &[f64]) -> Vec<f64> {
        point.iter().enumerate().map(|(j, &x)| (x - self.lower[j]) / self.width(j)).collect()
    }

    /// Inverse of [`normalize`](Self::normalize), clamped to the bounds.
    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(j, &u)| (self.lower[j] + u * self.width(j)).clamp(self.lower[j], self.upper[j]))
            .collect()
    }

    /// The whole space as a box in user coordinates.
    pub fn full_box(&self) -> AxisBox {
        AxisBox { lo: self.lower.clone(), hi: self.upper.clone() }
    }

    /// Maps a unit-cube box into user coordinates.
    pub fn denormalize_box(&self, unit_box: &AxisBox) -> AxisBox {
        AxisBox { lo: self.denormalize(&unit_box.lo), hi: self.denormalize(&unit_box.hi) }
    }
}

/// Closed axis-aligned box `[lo_j, hi_j]` per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (dim, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l <= h) {
                return Err(Error::InvalidBounds { dim, lower: l, upper: h });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: alloc::vec![0.0; dim], hi: alloc::vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// Closed-interval membership on both ends.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim() && point.iter().enumerate().all(|(j, &x)| x >= self.lo[j] && x <= self.hi[j])
    }

    pub fn is_subset_of(&self, other: &AxisBox) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|j| self.lo[j] >= other.lo[j] && self.hi[j] <= other.hi[j])
    }

    pub fn clip(&self, point: &mut [f64]) {
        for (j, x) in point.iter_mut().enumerate() {
            *x = x.clamp(self.lo[j], self.hi[j]);
        }
    }

    /// Shrinks the box to `x_j <= threshold` along `dim`.
    pub fn cap_upper(&mut self, dim: usize, threshold: f64) {
        self.hi[dim] = self.hi[dim].min(threshold).max(self.lo[dim]);
    }

    /// Shrinks the box to `x_j >= threshold` along `dim`.
    pub fn cap_lower(&mut self, dim: usize, threshold: f64) {
        self.lo[dim] = self.lo[dim].max(threshold).min(self.hi[dim]);
    }

    /// Intersection with `other`; empty dimensions collapse to a point.
    pub fn intersect(&self, other: &AxisBox) -> AxisBox {
        let mut out = self.clone();
        for j in 0..self.dim() {
            out.cap_lower(j, other.lo[j]);
            out.cap_upper(j, other.hi[j]);
        }
        out
    }
}

/// Fraction of the search space's volume covered by `region` (user coordinates).
pub fn box_volume_fraction(region: &AxisBox, space: &SearchSpace) -> f64 {
    (0..space.dim()).map(|j| (region.width(j) / space.width(j)).clamp(0.0, 1.0)).product()
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: Vec<f64>,
    pub cost: f64,
}

impl Observation {
    pub fn new(point: Vec<f64>, cost: f64) -> Result<Self> {
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost(cost));
        }
        Ok(Self { point, cost })
    }
}

/// Insertion-ordered observations with a tracked incumbent (earliest argmin).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    incumbent: Option<usize>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_observations(observations: Vec<Observation>) -> Result<Self> {
        let mut ds = Self::new();
        for obs in observations {
            ds.push(obs)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if !obs.cost.is_finite() {
            return Err(Error::NonFiniteCost(obs.cost));
        }
        let idx = self.observations.len();
        let better = match self.incumbent {
            None => true,
            Some(i) => obs.cost < self.observations[i].cost,
        };
        self.observations.push(obs);
        if better {
            self.incumbent = Some(idx);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn get(&self, i: usize) -> &Observation {
        &self.observations[i]
    }

    pub fn incumbent_index(&self) -> Option<usize> {
        self.incumbent
    }

    pub fn incumbent(&self) -> Option<&Observation> {
        self.incumbent.map(|i| &self.observations[i])
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.incumbent().map(|o| o.cost)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.observations.iter().map(|o| o.point.clone()).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.cost).collect()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset::new();
        for &i in indices {
            // costs were validated on insertion
            let _ = out.push(self.observations[i].clone());
        }
        out
    }
}

/// Splits dataset indices by closed membership in `region`.
pub fn points_in_box(dataset: &Dataset, region: &AxisBox) -> (Vec<usize>, Vec<usize>) {
    partition_points(dataset.observations().iter().map(|o| o.point.as_slice()), region)
}

pub(crate) fn partition_points<'a>(
    points: impl Iterator<Item = &'a [f64]>,
    region: &AxisBox,
) -> (Vec<usize>, Vec<usize>) {
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (i, p) in points.enumerate() {
        if region.contains(p) {
            inside.push(i);
        } else {
            outside.push(i);
        }
    }
    (inside, outside)
}
