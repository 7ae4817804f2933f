use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fft::signed_bin;
use crate::lattice::MomentumLattice;

/// Periodic position lattice `x_i = -L/2 + i·dx` with its conjugate momentum
/// lattice `p_j = 2πħ j / L`, `j ∈ [-N/2, N/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub length: f64,
    pub hbar: f64,
}

impl Grid {
    pub fn new(points: usize, length: f64, hbar: f64) -> Result<Self> {
        if points < 16 || !points.is_power_of_two() {
            return Err(invalid(format!(
                "grid points must be a power of two ≥ 16, got {points}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid("grid length must be positive"));
        }
        if !(hbar > 0.0) {
            return Err(invalid("ħ > 0 violated"));
        }
        Ok(Grid {
            points,
            length,
            hbar,
        })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Momentum lattice spacing `2πħ/L`.
    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / self.length
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Momenta in ascending order, the ordering used by momentum-representation
    /// states.
    pub fn momenta(&self) -> Vec<f64> {
        let half = (self.points / 2) as f64;
        (0..self.points)
            .map(|j| (j as f64 - half) * self.dp())
            .collect()
    }

    /// Momenta in FFT bin order.
    pub(crate) fn momenta_fft_order(&self) -> Vec<f64> {
        (0..self.points)
            .map(|b| signed_bin(b, self.points) as f64 * self.dp())
            .collect()
    }

    pub fn momentum_lattice(&self) -> MomentumLattice {
        MomentumLattice {
            points: self.points,
            spacing: self.dp(),
            origin: -((self.points / 2) as f64) * self.dp(),
        }
    }

    /// Largest representable momentum magnitude, `πħ/dx`.
    pub fn p_max(&self) -> f64 {
        (self.points / 2) as f64 * self.dp()
    }
}
