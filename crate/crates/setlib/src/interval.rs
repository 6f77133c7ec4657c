use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{check_dim, Polytope, SetError};

/// Axis-aligned box `[lower, upper]`, `lower ≤ upper` elementwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalJson", into = "IntervalJson")]
pub struct Interval {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Interval {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, SetError> {
        check_dim("interval bounds", lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(SetError::Invalid("interval lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[−r, r]` per component.
    pub fn symmetric(radii: &[f64]) -> Result<Self, SetError> {
        let r = DVector::from_column_slice(radii);
        Self::new(-&r, r)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn half_widths(&self) -> DVector<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
    }

    /// `self ⊆ other` within `tol`.
    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|i| self.lower[i] >= other.lower[i] - tol && self.upper[i] <= other.upper[i] + tol)
    }

    /// Largest `X` with `X ⊕ other ⊆ self` (Minkowski difference of boxes).
    pub fn erode(&self, other: &Interval) -> Result<Interval, SetError> {
        check_dim("interval erosion", self.dim(), other.dim())?;
        Interval::new(&self.lower - &other.lower, &self.upper - &other.upper).map_err(|_| SetError::Invalid("erosion leaves an empty interval".into()))
    }

    pub fn minkowski_sum(&self, other: &Interval) -> Result<Interval, SetError> {
        check_dim("interval sum", self.dim(), other.dim())?;
        Interval::new(&self.lower + &other.lower, &self.upper + &other.upper)
    }

    /// `[I; −I] x ≤ [upper; −lower]`.
    pub fn to_polytope(&self) -> Polytope {
        Polytope::from_interval(self)
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalJson {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl From<Interval> for IntervalJson {
    fn from(i: Interval) -> Self {
        Self { lower: i.lower.iter().copied().collect(), upper: i.upper.iter().copied().collect() }
    }
}

impl TryFrom<IntervalJson> for Interval {
    type Error = SetError;

    fn try_from(j: IntervalJson) -> Result<Self, SetError> {
        Interval::new(DVector::from_vec(j.lower), DVector::from_vec(j.upper))
    }
}
