//! Physical parameters and the closed-form coefficient relations.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parameters of the dust particle, the gas, and the master-equation
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Mass of the dust particle, `M`.
    pub dust_mass: f64,
    /// Mass of a gas molecule, `m`.
    pub molecule_mass: f64,
    pub temperature: f64,
    /// Friction rate.
    pub eta: f64,
    pub hbar: f64,
    pub k_b: f64,
    /// Momentum diffusion coefficient.
    pub d_p: f64,
    /// Position diffusion coefficient.
    pub d_x: f64,
}

impl PhysicalParams {
    /// Natural units (`hbar = k_B = m = k_B T = 1`) with momentum diffusion set
    /// by fluctuation-dissipation and position diffusion at the GKLS minimum.
    pub fn natural(dust_mass: f64, eta: f64) -> Result<Self> {
        let mut params = PhysicalParams {
            dust_mass,
            molecule_mass: 1.0,
            temperature: 1.0,
            eta,
            hbar: 1.0,
            k_b: 1.0,
            d_p: 0.0,
            d_x: 0.0,
        };
        params.d_p = fluctuation_dissipation_dp(&params);
        params.d_x = if params.d_p > 0.0 {
            gkls_min_dx(&params)?
        } else {
            0.0
        };
        validate_params(params)
    }

    pub fn k_bt(&self) -> f64 {
        self.k_b * self.temperature
    }
}

/// Checks every parameter invariant and returns the parameters unchanged.
pub fn validate_params(raw: PhysicalParams) -> Result<PhysicalParams> {
    let checks: [(bool, &str); 10] = [
        (raw.dust_mass > 0.0, "M > 0 violated"),
        (raw.molecule_mass > 0.0, "m > 0 violated"),
        (raw.dust_mass >= raw.molecule_mass, "M ≥ m violated"),
        (raw.temperature >= 0.0, "T ≥ 0 violated"),
        (raw.eta >= 0.0, "η ≥ 0 violated"),
        (raw.hbar > 0.0, "ħ > 0 violated"),
        (raw.k_b > 0.0, "k_B > 0 violated"),
        (raw.d_p >= 0.0, "D_p ≥ 0 violated"),
        (raw.d_x >= 0.0, "D_x ≥ 0 violated"),
        (
            [
                raw.dust_mass,
                raw.molecule_mass,
                raw.temperature,
                raw.eta,
                raw.hbar,
                raw.k_b,
                raw.d_p,
                raw.d_x,
            ]
            .iter()
            .all(|v| v.is_finite()),
            "all parameters must be finite",
        ),
    ];
    // NaN fails every comparison above, so the first failing check is reported.
    match checks.iter().find(|(ok, _)| !ok) {
        Some((_, msg)) => Err(invalid(*msg)),
        None => Ok(raw),
    }
}

/// Localization rate `Λ = flux · k² · σ_eff / ħ²`.
pub fn jz_localization_rate(flux: f64, k: f64, sigma_eff: f64, hbar: f64) -> Result<f64> {
    if !(flux >= 0.0 && k >= 0.0 && sigma_eff >= 0.0) {
        return Err(invalid("flux, k and σ_eff must be ≥ 0"));
    }
    if !(hbar > 0.0) {
        return Err(invalid("ħ > 0 violated"));
    }
    Ok(flux * k * k * sigma_eff / (hbar * hbar))
}

/// Momentum diffusion equivalent to a localization rate, `D_p = ħ² Λ`.
pub fn lambda_to_dp(lambda: f64, hbar: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid("Λ ≥ 0 violated"));
    }
    Ok(hbar * hbar * lambda)
}

/// `D_p = η M k_B T`.
pub fn fluctuation_dissipation_dp(params: &PhysicalParams) -> f64 {
    params.eta * params.dust_mass * params.k_b * params.temperature
}

/// Smallest position diffusion admitted by the GKLS bound,
/// `ħ² η² / (4 D_p)`.
pub fn gkls_min_dx(params: &PhysicalParams) -> Result<f64> {
    if params.eta == 0.0 {
        return Ok(0.0);
    }
    if !(params.d_p > 0.0) {
        return Err(invalid("GKLS bound diverges: D_p = 0 with η > 0"));
    }
    Ok(params.hbar * params.hbar * params.eta * params.eta / (4.0 * params.d_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GklsReport {
    pub d_x_min: f64,
    pub d_x_actual: f64,
    pub satisfied: bool,
    pub margin: f64,
}

pub fn check_gkls(params: &PhysicalParams) -> Result<GklsReport> {
    let d_x_min = gkls_min_dx(params)?;
    let margin = params.d_x - d_x_min;
    Ok(GklsReport {
        d_x_min,
        d_x_actual: params.d_x,
        satisfied: margin >= 0.0,
        margin,
    })
}
