//! Exact elastic collision kinematics, the overlap of post-collision molecule
//! states, and the single-collision map on the dust density matrix.

use std::f64::consts::PI;

use nalgebra::Vector3;
use ndarray::Array2;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::fractional_shift;
use crate::lattice::MomentumLattice;
use crate::master::{DensityMatrixState, Representation};
use crate::C64;

/// Relative threshold on `|ψ|²` that delimits a packet's support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Largest dust probability the collision map may push off the momentum grid.
pub const ESCAPE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionOutcome {
    pub p_f: f64,
    pub k_f: f64,
    /// Initial molecule momentum in the centre-of-mass frame.
    pub k_star: f64,
}

fn check_masses(dust_mass: f64, molecule_mass: f64) -> Result<()> {
    if !(dust_mass > 0.0 && molecule_mass > 0.0) {
        return Err(invalid("masses must be positive"));
    }
    Ok(())
}

/// `k* = (M k - m p) / (M + m)`.
pub fn com_momentum(p: f64, k: f64, dust_mass: f64, molecule_mass: f64) -> f64 {
    (dust_mass * k - molecule_mass * p) / (dust_mass + molecule_mass)
}

/// Hard-wall elastic collision in one dimension: `p → p + 2k*`, `k → k - 2k*`.
pub fn collide_1d(p: f64, k: f64, dust_mass: f64, molecule_mass: f64) -> Result<CollisionOutcome> {
    check_masses(dust_mass, molecule_mass)?;
    let k_star = com_momentum(p, k, dust_mass, molecule_mass);
    Ok(CollisionOutcome {
        p_f: p + 2.0 * k_star,
        k_f: k - 2.0 * k_star,
        k_star,
    })
}

/// `μ₊ k_i + μ₋ k_f` with `μ± = (M/m ± 1)/2`: the dust's final momentum
/// written without reference to its initial momentum.
pub fn final_momentum_mu_form(k_i: f64, k_f: f64, dust_mass: f64, molecule_mass: f64) -> Result<f64> {
    check_masses(dust_mass, molecule_mass)?;
    let ratio = dust_mass / molecule_mass;
    let mu_plus = 0.5 * (ratio + 1.0);
    let mu_minus = 0.5 * (ratio - 1.0);
    Ok(mu_plus * k_i + mu_minus * k_f)
}

/// Elastic collision in three dimensions. The molecule's centre-of-mass
/// momentum keeps its magnitude and is redirected along `n_hat`.
pub fn collide_3d_elastic(
    p_i: Vector3<f64>,
    k_i: Vector3<f64>,
    n_hat: Vector3<f64>,
    dust_mass: f64,
    molecule_mass: f64,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    check_masses(dust_mass, molecule_mass)?;
    if (n_hat.norm() - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("n_hat must be a unit vector, |n_hat| = {}", n_hat.norm())));
    }
    let total = dust_mass + molecule_mass;
    let p_total = p_i + k_i;
    let k_star = (k_i * dust_mass - p_i * molecule_mass) / total;
    let k_star_f = n_hat * k_star.norm();
    let k_f = p_total * (molecule_mass / total) + k_star_f;
    let p_f = p_total - k_f;
    Ok((p_f, k_f))
}

/// Molecule wave packet `ψ(k)` sampled on a momentum lattice, normalized so
/// that `Σ |ψ_j|² Δk = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculePacket {
    pub lattice: MomentumLattice,
    pub amplitudes: Vec<C64>,
}

impl MoleculePacket {
    /// Wraps amplitudes that are already normalized to within 1e-10.
    pub fn new(lattice: MomentumLattice, amplitudes: Vec<C64>) -> Result<Self> {
        let packet = Self::unchecked(lattice, amplitudes)?;
        let norm = packet.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("packet norm {norm} differs from 1")));
        }
        Ok(packet)
    }

    /// Rescales arbitrary amplitudes to unit norm.
    pub fn normalized(lattice: MomentumLattice, amplitudes: Vec<C64>) -> Result<Self> {
        let mut packet = Self::unchecked(lattice, amplitudes)?;
        let norm = packet.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("packet has zero norm"));
        }
        let scale = 1.0 / norm.sqrt();
        packet.amplitudes.iter_mut().for_each(|z| *z *= scale);
        Ok(packet)
    }

    fn unchecked(lattice: MomentumLattice, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != lattice.points {
            return Err(invalid("amplitude count does not match lattice"));
        }
        Ok(MoleculePacket { lattice, amplitudes })
    }

    /// Real Gaussian `ψ(k) ∝ exp(-(k-k₀)²/(4σ²))`, so that `|ψ|²` has
    /// standard deviation `std`.
    pub fn gaussian(lattice: MomentumLattice, center: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(invalid("packet width must be positive"));
        }
        let amps = lattice
            .values()
            .iter()
            .map(|&k| C64::new((-(k - center).powi(2) / (4.0 * std * std)).exp(), 0.0))
            .collect();
        Self::normalized(lattice, amps)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.lattice.spacing
    }

    pub fn mean(&self) -> f64 {
        let dk = self.lattice.spacing;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, z)| self.lattice.k(j) * z.norm_sqr() * dk)
            .sum()
    }

    /// Standard deviation of `|ψ(k)|²`.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let dk = self.lattice.spacing;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, z)| (self.lattice.k(j) - mean).powi(2) * z.norm_sqr() * dk)
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest interval holding every point with `|ψ|² ≥ threshold · max|ψ|²`.
    pub fn support(&self, threshold: f64) -> (f64, f64) {
        let peak = self.amplitudes.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let inside = |z: &C64| z.norm_sqr() >= threshold * peak;
        let lo = self.amplitudes.iter().position(inside).unwrap_or(0);
        let hi = self.amplitudes.iter().rposition(inside).unwrap_or(self.lattice.points - 1);
        (self.lattice.k(lo), self.lattice.k(hi))
    }

    /// Samples of `ψ(k_j + shift)` by trigonometric interpolation, rejecting
    /// shifts that would carry the support across a lattice edge.
    pub fn shifted(&self, shift: f64) -> Result<Vec<C64>> {
        let (lo, hi) = self.support(SUPPORT_THRESHOLD);
        if lo - shift < self.lattice.min() || hi - shift > self.lattice.max() {
            return Err(Error::Aliasing(format!(
                "shift {shift:.3e} moves packet support [{lo:.3e}, {hi:.3e}] outside lattice [{:.3e}, {:.3e}]",
                self.lattice.min(),
                self.lattice.max()
            )));
        }
        Ok(fractional_shift(&self.amplitudes, shift / self.lattice.spacing))
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = C64::from_polar(1.0, theta);
        MoleculePacket {
            lattice: self.lattice,
            amplitudes: self.amplitudes.iter().map(|z| z * phase).collect(),
        }
    }

    /// Position-space amplitudes on the conjugate lattice
    /// `x_n = 2πħ n / (N Δk)`, `n ∈ [-N/2, N/2)`, normalized so that
    /// `Σ |ψ(x_n)|² Δx = 1`.
    pub fn position_representation(&self, hbar: f64) -> (Vec<f64>, Vec<C64>) {
        let n = self.lattice.points;
        let dk = self.lattice.spacing;
        let dx = 2.0 * PI * hbar / (n as f64 * dk);
        // ψ(x) = (2πħ)^{-1/2} Σ_j ψ(k_j) e^{i k_j x/ħ} Δk.
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let scale = dk / (2.0 * PI * hbar).sqrt();
        let mut xs = Vec::with_capacity(n);
        let mut amps = Vec::with_capacity(n);
        for s in 0..n {
            let signed = s as i64 - (n / 2) as i64;
            let bin = signed.rem_euclid(n as i64) as usize;
            let x = signed as f64 * dx;
            let phase = C64::from_polar(1.0, self.lattice.origin * x / hbar);
            xs.push(x);
            amps.push(buf[bin] * phase * scale);
        }
        (xs, amps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceFactor {
    pub value: C64,
    pub delta_p: f64,
}

/// Molecule momentum shift that makes the two branches' final molecule
/// momenta coincide: `k' = k + 2m(p - p')/(m - M)`.
pub fn branch_shift(delta_p: f64, dust_mass: f64, molecule_mass: f64) -> f64 {
    2.0 * molecule_mass * delta_p / (molecule_mass - dust_mass)
}

/// Overlap `∫dk ψ(k) ψ*(k + s)` of the molecule states scattered off dust
/// momenta `p` and `p'`, by trapezoidal quadrature on the packet lattice.
pub fn decoherence_factor(
    p: f64,
    p_prime: f64,
    psi: &MoleculePacket,
    dust_mass: f64,
    molecule_mass: f64,
) -> Result<DecoherenceFactor> {
    check_masses(dust_mass, molecule_mass)?;
    let delta_p = p - p_prime;
    if delta_p == 0.0 {
        return Ok(DecoherenceFactor {
            value: C64::new(1.0, 0.0),
            delta_p,
        });
    }
    if dust_mass <= molecule_mass {
        return Err(invalid("branch shift requires M > m"));
    }
    let shift = branch_shift(delta_p, dust_mass, molecule_mass);
    let shifted = psi.shifted(shift)?;
    let value = psi
        .amplitudes
        .iter()
        .zip(&shifted)
        .map(|(a, b)| a * b.conj())
        .sum::<C64>()
        * psi.lattice.spacing;
    Ok(DecoherenceFactor { value, delta_p })
}

/// One collision of the whole packet with every momentum component of the
/// dust.
///
/// The reduced map is assembled in Kraus form, indexed by the final molecule
/// momentum `k_f`: `K_{k_f}|p⟩ = √Δk ψ(k(p, k_f)) |p + k - k_f⟩`, where
/// `k(p, k_f)` is the unique initial molecule momentum leading to `k_f`. The
/// final molecule momenta are sampled so that `k(p, k_f)` steps by exactly
/// the packet spacing. Off-lattice dust momenta are split linearly between
/// the two neighbouring lattice points, each side being its own Kraus
/// operator, which keeps the map completely positive and the mean momentum
/// exact.
pub fn apply_collision_to_dust(
    rho: &DensityMatrixState,
    psi: &MoleculePacket,
    dust_mass: f64,
    molecule_mass: f64,
) -> Result<DensityMatrixState> {
    check_masses(dust_mass, molecule_mass)?;
    rho.require(Representation::Momentum)?;
    if dust_mass <= molecule_mass {
        return Err(invalid("collision map requires M > m"));
    }
    let (big, small) = (dust_mass, molecule_mass);
    let grid = rho.grid;
    let n = grid.points;
    let ps = grid.momenta();
    let dp = grid.dp();
    let p_min = ps[0];
    let dk = psi.lattice.spacing;
    let amp_scale = dk.sqrt();
    let peak = psi.amplitudes.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let negligible = 1e-30 * peak;
    let diag = rho.diagonal_probabilities();

    // (kraus index, source dust index, target dust index, amplitude)
    let mut entries: Vec<(i64, usize, usize, C64)> = Vec::new();
    let mut total = vec![0.0f64; n];
    let mut lost = vec![0.0f64; n];
    for (a, &p) in ps.iter().enumerate() {
        let u = (2.0 * small * p / (big - small) - psi.lattice.min()) / dk;
        let base = u.floor();
        let frac = u - base;
        let base = base as i64;
        let samples = fractional_shift(&psi.amplitudes, frac);
        for (idx, z) in samples.iter().enumerate() {
            if z.norm_sqr() <= negligible {
                continue;
            }
            let j = base - idx as i64;
            let k = psi.lattice.k(idx) + frac * dk;
            let k_f = j as f64 * dk * (big - small) / (big + small);
            let p_f = p + k - k_f;
            let amp = *z * amp_scale;
            total[a] += amp.norm_sqr();
            let y = (p_f - p_min) / dp;
            let lo = y.floor();
            let w = y - lo;
            let lo = lo as i64;
            for (side, target, weight) in [(0i64, lo, 1.0 - w), (1, lo + 1, w)] {
                if weight == 0.0 {
                    continue;
                }
                let piece = amp * weight.sqrt();
                if target < 0 || target >= n as i64 {
                    lost[a] += piece.norm_sqr();
                } else {
                    entries.push((2 * j + side, a, target as usize, piece));
                }
            }
        }
    }
    let escaped: f64 = (0..n)
        .filter(|&a| total[a] > 0.0)
        .map(|a| diag[a].max(0.0) * lost[a] / total[a])
        .sum();
    if escaped > ESCAPE_TOLERANCE {
        let worst = (0..n)
            .max_by(|&a, &b| (diag[a] * lost[a]).total_cmp(&(diag[b] * lost[b])))
            .unwrap_or(0);
        return Err(Error::Aliasing(format!(
            "collision pushes probability {escaped:.3e} outside the grid, mostly from dust momentum {:.3e}",
            ps[worst]
        )));
    }
    let norm: Vec<f64> = total.iter().map(|t| if *t > 0.0 { 1.0 / t.sqrt() } else { 0.0 }).collect();

    entries.sort_by_key(|e| e.0);
    let mut out = Array2::<C64>::zeros((n, n));
    let values = &rho.values;
    for group in entries.chunk_by(|x, y| x.0 == y.0) {
        for &(_, a, ta, za) in group {
            let za = za * norm[a];
            for &(_, b, tb, zb) in group {
                out[[ta, tb]] += za * (zb * norm[b]).conj() * values[[a, b]];
            }
        }
    }
    let mut state = DensityMatrixState::from_matrix(grid, Representation::Momentum, out)?;
    state.symmetrize();
    Ok(state)
}
