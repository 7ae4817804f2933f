//! Thermal molecule momentum distribution and its pure-state (square-root)
//! substitute.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::collision::MoleculePacket;
use crate::error::{invalid, Result};
use crate::lattice::MomentumLattice;
use crate::C64;

/// Minimum lattice half-span in units of the thermal standard deviation.
pub const MIN_SPAN_STD: f64 = 6.0;
/// Default lattice half-span in units of the thermal standard deviation.
pub const DEFAULT_SPAN_STD: f64 = 8.0;
pub const DEFAULT_POINTS: usize = 512;

/// Which variance the thermal momentum distribution carries.
///
/// `Half` uses `ρ(k) ∝ exp(-k²/(m k_B T))`, variance `m k_B T / 2`.
/// `Standard` uses the Maxwell-Boltzmann `exp(-k²/(2 m k_B T))`, variance
/// `m k_B T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceConvention {
    #[default]
    Half,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub molecule_mass: f64,
    pub temperature: f64,
    pub k_b: f64,
    pub hbar: f64,
    #[serde(default)]
    pub convention: VarianceConvention,
}

impl ThermalSpec {
    pub fn new(molecule_mass: f64, temperature: f64, k_b: f64, hbar: f64) -> Result<Self> {
        let spec = ThermalSpec {
            molecule_mass,
            temperature,
            k_b,
            hbar,
            convention: VarianceConvention::Half,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_convention(mut self, convention: VarianceConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.molecule_mass > 0.0) {
            return Err(invalid("m > 0 violated"));
        }
        if !(self.temperature > 0.0) {
            return Err(invalid("T > 0 violated"));
        }
        if !(self.k_b > 0.0 && self.hbar > 0.0) {
            return Err(invalid("k_B and ħ must be positive"));
        }
        Ok(())
    }

    pub fn momentum_variance(&self) -> f64 {
        let mkt = self.molecule_mass * self.k_b * self.temperature;
        match self.convention {
            VarianceConvention::Half => 0.5 * mkt,
            VarianceConvention::Standard => mkt,
        }
    }

    pub fn momentum_std(&self) -> f64 {
        self.momentum_variance().sqrt()
    }

    /// Lattice of [`DEFAULT_POINTS`] points spanning ±[`DEFAULT_SPAN_STD`]
    /// standard deviations.
    pub fn default_lattice(&self) -> Result<MomentumLattice> {
        MomentumLattice::with_half_span(DEFAULT_POINTS, DEFAULT_SPAN_STD * self.momentum_std())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvForm {
    Diagonal,
    Msqr,
}

/// Gas state on a momentum lattice. `weights` is the diagonal `ρ(k)` with
/// `Σ ρ(k_j) Δk = 1`; `matrix` holds `ρ(k, k')` for the square-root form.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub lattice: MomentumLattice,
    pub weights: Vec<f64>,
    pub matrix: Option<Array2<C64>>,
    pub form: EnvForm,
}

impl EnvState {
    /// `tr ρ²` of the matrix form, with `Δk` as the quadrature weight.
    pub fn purity(&self) -> Option<f64> {
        let dk = self.lattice.spacing;
        self.matrix.as_ref().map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>() * dk * dk)
    }

    pub fn second_moment(&self) -> f64 {
        let dk = self.lattice.spacing;
        self.weights.iter().enumerate().map(|(j, w)| self.lattice.k(j).powi(2) * w * dk).sum()
    }
}

fn check_span(spec: &ThermalSpec, lattice: &MomentumLattice) -> Result<()> {
    spec.validate()?;
    let needed = MIN_SPAN_STD * spec.momentum_std();
    if lattice.half_span() < needed {
        return Err(invalid(format!(
            "lattice half-span {:.4e} is below {MIN_SPAN_STD} thermal standard deviations ({needed:.4e})",
            lattice.half_span()
        )));
    }
    Ok(())
}

/// Normalized thermal weights `ρ(k) ∝ exp(-k²/(2 var))` on the lattice.
pub fn thermal_distribution(spec: &ThermalSpec, lattice: MomentumLattice) -> Result<EnvState> {
    check_span(spec, &lattice)?;
    let var = spec.momentum_variance();
    let mut weights: Vec<f64> = lattice.values().iter().map(|k| (-k * k / (2.0 * var)).exp()).collect();
    let total: f64 = weights.iter().sum::<f64>() * lattice.spacing;
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(EnvState {
        lattice,
        weights,
        matrix: None,
        form: EnvForm::Diagonal,
    })
}

/// Rank-one replacement `ρ(k, k') = √ρ(k) √ρ(k')`.
pub fn msqr_density_matrix(env: &EnvState) -> Result<EnvState> {
    if env.form != EnvForm::Diagonal {
        return Err(invalid("square-root construction needs a diagonal gas state"));
    }
    let roots: Vec<f64> = env.weights.iter().map(|w| w.sqrt()).collect();
    let n = roots.len();
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| C64::new(roots[i] * roots[j], 0.0));
    Ok(EnvState {
        lattice: env.lattice,
        weights: env.weights.clone(),
        matrix: Some(matrix),
        form: EnvForm::Msqr,
    })
}

/// Standing Gaussian packet `ψ(k) = √ρ(k)` whose modulus squared reproduces
/// the thermal weights.
pub fn msqr_wave_packet(spec: &ThermalSpec, lattice: MomentumLattice) -> Result<MoleculePacket> {
    let env = thermal_distribution(spec, lattice)?;
    let amps = env.weights.iter().map(|w| C64::new(w.sqrt(), 0.0)).collect();
    MoleculePacket::new(lattice, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec() -> ThermalSpec {
        ThermalSpec::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn thermal_weights_are_normalized_and_even() {
        let spec = unit_spec();
        let env = thermal_distribution(&spec, spec.default_lattice().unwrap()).unwrap();
        let n = env.weights.len();
        let sum: f64 = env.weights.iter().sum::<f64>() * env.lattice.spacing;
        assert!((sum - 1.0).abs() < 1e-10);
        let peak = env.weights.iter().cloned().fold(0.0, f64::max);
        assert_eq!(env.weights[n / 2], peak);
        for j in 1..n / 2 {
            assert!((env.weights[n / 2 + j] - env.weights[n / 2 - j]).abs() < 1e-15);
        }
    }

    #[test]
    fn second_moment_matches_convention() {
        for (conv, expect) in [(VarianceConvention::Half, 0.5 * 2.5), (VarianceConvention::Standard, 2.5)] {
            let spec = ThermalSpec::new(2.5, 1.0, 1.0, 1.0).unwrap().with_convention(conv);
            let env = thermal_distribution(&spec, spec.default_lattice().unwrap()).unwrap();
            assert!((env.second_moment() / expect - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn narrow_lattice_is_rejected() {
        let spec = unit_spec();
        let lattice = MomentumLattice::with_half_span(128, 5.0 * spec.momentum_std()).unwrap();
        assert!(thermal_distribution(&spec, lattice).is_err());
    }

    #[test]
    fn invalid_spec_is_rejected() {
        assert!(ThermalSpec::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ThermalSpec::new(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn msqr_matrix_is_pure_and_keeps_diagonal() {
        let spec = unit_spec();
        let env = thermal_distribution(&spec, spec.default_lattice().unwrap()).unwrap();
        let pure = msqr_density_matrix(&env).unwrap();
        let m = pure.matrix.as_ref().unwrap();
        for j in 0..env.weights.len() {
            assert!((m[[j, j]].re - env.weights[j]).abs() < 1e-15);
        }
        assert!((pure.purity().unwrap() - 1.0).abs() < 1e-10);
        assert!(msqr_density_matrix(&pure).is_err());
    }

    #[test]
    fn packet_modulus_matches_weights() {
        let spec = unit_spec();
        let lattice = spec.default_lattice().unwrap();
        let env = thermal_distribution(&spec, lattice).unwrap();
        let psi = msqr_wave_packet(&spec, lattice).unwrap();
        for (z, w) in psi.amplitudes.iter().zip(&env.weights) {
            assert!((z.norm_sqr() - w).abs() < 1e-10);
        }
        assert!(psi.mean().abs() < 1e-14);
    }
}
