use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{invalid, Error, Result};
use crate::fft::Spectral2d;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Position,
    Momentum,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Momentum => "momentum",
        }
    }
}

/// Dense density matrix on a [`Grid`].
///
/// In the position representation element `(i, j)` is `ρ(x_i, x_j)`; in the
/// momentum representation it is `ρ(p_i, p_j)` with momenta ascending. Both
/// are normalized to unit trace as discrete matrices.
const FLUSH: f64 = 1e-280;

#[derive(Debug, Clone)]
pub struct DensityMatrixState {
    pub values: Array2<C64>,
    pub rep: Representation,
    pub grid: Grid,
}

impl DensityMatrixState {
    pub fn from_matrix(grid: Grid, rep: Representation, values: Array2<C64>) -> Result<Self> {
        if values.dim() != (grid.points, grid.points) {
            return Err(invalid(format!(
                "matrix shape {:?} does not match grid of {} points",
                values.dim(),
                grid.points
            )));
        }
        Ok(DensityMatrixState { values, rep, grid })
    }

    /// `|ψ⟩⟨ψ|` for position-space amplitudes, normalized to unit trace.
    pub fn from_pure_position(grid: Grid, psi: &[C64]) -> Result<Self> {
        if psi.len() != grid.points {
            return Err(invalid("wavefunction length does not match grid"));
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return Err(invalid("zero wavefunction"));
        }
        let scale = 1.0 / norm2.sqrt();
        let psi: Vec<C64> = psi.iter().map(|z| z * scale).collect();
        let values = Array2::from_shape_fn((grid.points, grid.points), |(i, j)| psi[i] * psi[j].conj());
        Ok(DensityMatrixState {
            values,
            rep: Representation::Position,
            grid,
        })
    }

    /// Pure Gaussian packet with position standard deviation `sigma_x`, mean
    /// position `x0` and mean momentum `p0`.
    pub fn gaussian(grid: Grid, x0: f64, p0: f64, sigma_x: f64) -> Result<Self> {
        if !(sigma_x > 0.0) {
            return Err(invalid("packet width must be positive"));
        }
        let psi: Vec<C64> = grid
            .positions()
            .iter()
            .map(|&x| {
                let envelope = (-(x - x0).powi(2) / (4.0 * sigma_x * sigma_x)).exp();
                C64::from_polar(envelope, p0 * x / grid.hbar)
            })
            .collect();
        Self::from_pure_position(grid, &psi)
    }

    pub fn points(&self) -> usize {
        self.grid.points
    }

    pub fn trace(&self) -> C64 {
        self.values.diag().sum()
    }

    /// `max |ρ - ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.points();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.values[[i, j]] - self.values[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// `ρ ← (ρ + ρ†)/2`. Entries below 1e-280 in magnitude are set to zero
    /// so that fully decayed coherences do not drift into subnormal range.
    pub fn symmetrize(&mut self) {
        let n = self.points();
        for i in 0..n {
            for j in i..n {
                let mut avg = 0.5 * (self.values[[i, j]] + self.values[[j, i]].conj());
                if avg.re.abs() < FLUSH && avg.im.abs() < FLUSH {
                    avg = C64::new(0.0, 0.0);
                }
                self.values[[i, j]] = avg;
                self.values[[j, i]] = avg.conj();
            }
        }
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.points();
        let m = DMatrix::from_fn(n, n, |i, j| {
            0.5 * (self.values[[i, j]] + self.values[[j, i]].conj())
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Checks Hermiticity (1e-10) and unit trace (1e-8).
    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(invalid(format!("density matrix not Hermitian: {herm:.3e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > 1e-8 {
            return Err(invalid(format!("trace {tr} differs from 1")));
        }
        Ok(())
    }

    /// Checks positivity with the default tolerance `-1e-8`.
    pub fn check_positive(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(invalid(format!("density matrix not positive: λ_min = {min:.3e}")));
        }
        Ok(())
    }

    pub fn require(&self, rep: Representation) -> Result<()> {
        if self.rep != rep {
            return Err(Error::RepresentationMismatch {
                expected: rep.name(),
                got: self.rep.name(),
            });
        }
        Ok(())
    }

    pub fn to_momentum(&self) -> DensityMatrixState {
        match self.rep {
            Representation::Momentum => self.clone(),
            Representation::Position => {
                let mut values = self.values.clone();
                Spectral2d::new(self.points()).to_momentum(&mut values);
                DensityMatrixState {
                    values: raw_to_sorted(&values),
                    rep: Representation::Momentum,
                    grid: self.grid,
                }
            }
        }
    }

    pub fn to_position(&self) -> DensityMatrixState {
        match self.rep {
            Representation::Position => self.clone(),
            Representation::Momentum => {
                let mut values = sorted_to_raw(&self.values);
                Spectral2d::new(self.points()).to_position(&mut values);
                DensityMatrixState {
                    values,
                    rep: Representation::Position,
                    grid: self.grid,
                }
            }
        }
    }

    /// Probabilities on the diagonal of the current representation.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        self.values.diag().iter().map(|z| z.re).collect()
    }
}

/// Sorted momentum index `s` ↔ signed index `j = s - N/2` ↔ FFT bin `j mod N`.
/// The position origin at `-L/2` contributes the phase `(-1)^j`.
fn sorted_index_map(n: usize) -> Vec<(usize, f64)> {
    (0..n)
        .map(|s| {
            let j = s as i64 - (n / 2) as i64;
            let bin = j.rem_euclid(n as i64) as usize;
            let phase = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            (bin, phase)
        })
        .collect()
}

pub(crate) fn raw_to_sorted(raw: &Array2<C64>) -> Array2<C64> {
    let n = raw.nrows();
    let map = sorted_index_map(n);
    Array2::from_shape_fn((n, n), |(s, t)| {
        let (bs, ps) = map[s];
        let (bt, pt) = map[t];
        raw[[bs, bt]] * (ps * pt)
    })
}

pub(crate) fn sorted_to_raw(sorted: &Array2<C64>) -> Array2<C64> {
    let n = sorted.nrows();
    let map = sorted_index_map(n);
    let mut raw = Array2::zeros((n, n));
    for s in 0..n {
        let (bs, ps) = map[s];
        for t in 0..n {
            let (bt, pt) = map[t];
            raw[[bs, bt]] = sorted[[s, t]] * (ps * pt);
        }
    }
    raw
}
