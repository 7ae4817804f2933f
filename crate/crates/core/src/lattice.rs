//! Uniform one-dimensional momentum lattices.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform lattice `k_j = origin + j · spacing`, `j = 0 .. points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumLattice {
    pub points: usize,
    pub spacing: f64,
    pub origin: f64,
}

impl MomentumLattice {
    /// Lattice with the symmetric index range `j - points/2`, so that
    /// `k = 0` is a lattice point.
    pub fn centered(points: usize, spacing: f64) -> Result<Self> {
        if points < 2 {
            return Err(invalid("lattice needs at least 2 points"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("lattice spacing must be positive"));
        }
        Ok(MomentumLattice {
            points,
            spacing,
            origin: -((points / 2) as f64) * spacing,
        })
    }

    /// Centered lattice whose lowest point sits at `-half_span`.
    pub fn with_half_span(points: usize, half_span: f64) -> Result<Self> {
        if !(half_span > 0.0) {
            return Err(invalid("lattice half span must be positive"));
        }
        Self::centered(points, 2.0 * half_span / points as f64)
    }

    #[inline]
    pub fn k(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    pub fn min(&self) -> f64 {
        self.origin
    }

    pub fn max(&self) -> f64 {
        self.k(self.points - 1)
    }

    /// Smallest distance from the origin to either lattice edge.
    pub fn half_span(&self) -> f64 {
        (-self.min()).min(self.max())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.k(j)).collect()
    }

    /// Same span, `factor` times as many points.
    pub fn refined(&self, factor: usize) -> Self {
        MomentumLattice {
            points: self.points * factor,
            spacing: self.spacing / factor as f64,
            origin: self.origin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_contains_zero() {
        let l = MomentumLattice::centered(8, 0.5).unwrap();
        assert_eq!(l.k(4), 0.0);
        assert_eq!(l.min(), -2.0);
        assert_eq!(l.max(), 1.5);
        assert_eq!(l.half_span(), 1.5);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(MomentumLattice::centered(1, 1.0).is_err());
        assert!(MomentumLattice::centered(8, 0.0).is_err());
    }
}
