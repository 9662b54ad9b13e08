//! Time grids and trapezoidal quadrature.
//!
//! Every functional quantity in the crate lives on a shared grid of design
//! points in `[0, 1]`. Inner products and norms are always the quadrature
//! versions with the weights stored here, so downstream code never needs to
//! know the grid spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing design points in `[0, 1]` with trapezoidal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid from design points, computing composite trapezoid weights.
    ///
    /// Weights are `(t_2 - t_1)/2` and `(t_T - t_{T-1})/2` at the ends and
    /// `(t_{k+1} - t_{k-1})/2` inside, so they sum to `t_T - t_1` exactly up
    /// to rounding.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("time grid needs at least 2 points"));
        }
        for &t in &points {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!(
                    "time grid point {t} outside [0, 1]"
                )));
            }
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        let t_len = points.len();
        let mut weights = vec![0.0; t_len];
        weights[0] = (points[1] - points[0]) / 2.0;
        weights[t_len - 1] = (points[t_len - 1] - points[t_len - 2]) / 2.0;
        for k in 1..t_len - 1 {
            weights[k] = (points[k + 1] - points[k - 1]) / 2.0;
        }
        Ok(TimeGrid { points, weights })
    }

    /// Uniform grid of `t_len` points spanning `[0, 1]` inclusive.
    pub fn uniform(t_len: usize) -> Result<Self> {
        if t_len < 2 {
            return Err(Error::invalid("time grid needs at least 2 points"));
        }
        let step = 1.0 / (t_len - 1) as f64;
        Self::new((0..t_len).map(|k| k as f64 * step).collect())
    }

    /// Number of design points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the grid is empty (cannot happen for a constructed grid).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Design points.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Trapezoid quadrature weights, one per design point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature inner product `sum_k w_k a_k b_k`.
    ///
    /// Panics in debug builds if the slices do not match the grid length.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        let mut acc = 0.0;
        for k in 0..self.len() {
            acc += self.weights[k] * a[k] * b[k];
        }
        acc
    }

    /// Quadrature L2 norm `sqrt(sum_k w_k a_k^2)`.
    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }
}
