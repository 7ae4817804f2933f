//! Position-diffusion coefficients: extraction from single-collision
//! overlaps, the narrow-packet divergence scan, the finite intercollision
//! time formula, and a side-by-side report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{decoherence_factor, MoleculePacket};
use crate::error::{invalid, Error, Result};
use crate::lattice::MomentumLattice;
use crate::master::Grid;
use crate::physical::{gkls_min_dx, PhysicalParams};

/// Number of smallest nonzero dust-momentum separations used by the fit.
pub const FIT_POINTS: usize = 8;
/// Largest relative residual of the quadratic model inside the fit region.
pub const RESIDUAL_GATE: f64 = 0.05;
/// Overlaps below this magnitude carry no usable exponent.
pub const OVERLAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DxFit {
    pub d_x_fit: f64,
    pub fit_error: f64,
    /// Fitted `c` in `-ln|D(Δp)| ≈ c Δp²`.
    pub exponent_coefficient: f64,
    pub points_used: usize,
    pub max_relative_residual: f64,
    /// `|D|` at the smallest nonzero separation.
    pub overlap_at_min_dp: f64,
}

/// Momentum transfer rate `η = 2 m ν / (M + m)` of a gas colliding at rate
/// `ν`, from the mean momentum loss per collision with molecules at rest on
/// average.
pub fn friction_from_collision_rate(dust_mass: f64, molecule_mass: f64, collision_rate: f64) -> f64 {
    2.0 * molecule_mass * collision_rate / (dust_mass + molecule_mass)
}

/// Fits `-ln|D(Δp)| = c Δp²` over the smallest nonzero grid separations and
/// converts it to `D_x = c ħ² ν`.
///
/// The fit is anchored at `D(0) = 1` (no intercept) and uses the longest
/// prefix of separations whose overlaps exceed [`OVERLAP_FLOOR`] and whose
/// residuals stay within [`RESIDUAL_GATE`].
pub fn extract_dx_from_collisions(
    psi: &MoleculePacket,
    dust_mass: f64,
    molecule_mass: f64,
    collision_rate: f64,
    grid: &Grid,
) -> Result<DxFit> {
    if !(collision_rate >= 0.0) {
        return Err(invalid("collision rate must be non-negative"));
    }
    if (psi.norm() - 1.0).abs() > 1e-8 {
        return Err(invalid("packet must be normalized"));
    }
    let dp = grid.dp();
    let mut xs = Vec::with_capacity(FIT_POINTS);
    let mut ys = Vec::with_capacity(FIT_POINTS);
    let mut first = None;
    for j in 1..=FIT_POINTS {
        let delta = j as f64 * dp;
        let d = decoherence_factor(delta, 0.0, psi, dust_mass, molecule_mass)?.value.norm();
        first.get_or_insert(d);
        if !(d >= OVERLAP_FLOOR) {
            break;
        }
        xs.push(delta);
        ys.push(-d.ln());
    }
    let overlap_at_min_dp = first.unwrap_or(1.0);
    if xs.is_empty() {
        return Err(Error::FitRegionEmpty(format!(
            "overlap {overlap_at_min_dp:.3e} at the smallest separation is below {OVERLAP_FLOOR:e}"
        )));
    }

    let fit = |n: usize| -> (f64, f64) {
        let num: f64 = (0..n).map(|i| ys[i] * xs[i].powi(2)).sum();
        let den: f64 = (0..n).map(|i| xs[i].powi(4)).sum();
        let c = num / den;
        let worst = (0..n)
            .map(|i| {
                let model = c * xs[i].powi(2);
                (ys[i] - model).abs() / model.abs().max(ys[i].abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        (c, worst)
    };
    let mut best = fit(1);
    let mut used = 1;
    for n in 2..=xs.len() {
        let candidate = fit(n);
        if candidate.1 > RESIDUAL_GATE {
            break;
        }
        best = candidate;
        used = n;
    }
    let (c, residual) = best;
    if !(c >= 0.0) {
        return Err(Error::FitFailure(format!("negative exponent coefficient {c:.3e}")));
    }
    let hbar = grid.hbar;
    let d_x_fit = c * hbar * hbar * collision_rate;
    Ok(DxFit {
        d_x_fit,
        fit_error: d_x_fit * residual,
        exponent_coefficient: c,
        points_used: used,
        max_relative_residual: residual,
        overlap_at_min_dp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub width: f64,
    pub d_x_fit: Option<f64>,
    pub fit_error: Option<f64>,
    pub points_used: usize,
    pub overlap_at_min_dp: Option<f64>,
    /// Reason the fit could not be made, if any.
    pub flag: Option<String>,
}

/// Runs [`extract_dx_from_collisions`] for centred Gaussian packets of each
/// momentum standard deviation on `lattice`. Rows whose fit fails carry a
/// flag instead of a value.
pub fn cmd_divergence_scan(
    widths: &[f64],
    dust_mass: f64,
    molecule_mass: f64,
    collision_rate: f64,
    grid: &Grid,
    lattice: MomentumLattice,
) -> Result<Vec<DivergenceRow>> {
    if widths.is_empty() {
        return Err(invalid("scan needs at least one width"));
    }
    for &w in widths {
        if !(w >= 2.0 * lattice.spacing && w <= lattice.half_span() / 6.0) {
            return Err(invalid(format!(
                "width {w:.3e} outside representable range [{:.3e}, {:.3e}]",
                2.0 * lattice.spacing,
                lattice.half_span() / 6.0
            )));
        }
    }
    widths
        .par_iter()
        .map(|&width| {
            let psi = MoleculePacket::gaussian(lattice, 0.0, width)?;
            Ok(match extract_dx_from_collisions(&psi, dust_mass, molecule_mass, collision_rate, grid) {
                Ok(fit) => DivergenceRow {
                    width,
                    d_x_fit: Some(fit.d_x_fit),
                    fit_error: Some(fit.fit_error),
                    points_used: fit.points_used,
                    overlap_at_min_dp: Some(fit.overlap_at_min_dp),
                    flag: None,
                },
                Err(e @ (Error::FitRegionEmpty(_) | Error::FitFailure(_) | Error::Aliasing(_))) => DivergenceRow {
                    width,
                    d_x_fit: None,
                    fit_error: None,
                    points_used: 0,
                    overlap_at_min_dp: None,
                    flag: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// True if every fitted value is at least as large as the one for the next
/// wider packet.
pub fn scan_is_monotone(rows: &[DivergenceRow]) -> bool {
    let mut fitted: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.d_x_fit.map(|d| (r.width, d))).collect();
    fitted.sort_by(|a, b| b.0.total_cmp(&a.0));
    fitted.windows(2).all(|w| w[1].1 >= w[0].1)
}

/// `D_x = (1/3)(τ²/M) D_p`.
pub fn finite_tau_dx(tau: f64, mass: f64, d_p: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(invalid("τ ≥ 0 violated"));
    }
    if !(mass > 0.0) {
        return Err(invalid("M > 0 violated"));
    }
    Ok((1.0 / 3.0) * (tau * tau / mass) * d_p)
}

/// Smallest `τ` with `finite_tau_dx(τ) = target`, by bisection to
/// relative precision 1e-14. `None` if the target is unreachable.
pub fn crossover_tau(mass: f64, d_p: f64, target: f64) -> Result<Option<f64>> {
    if target == 0.0 {
        return Ok(Some(0.0));
    }
    if !(d_p > 0.0 && target > 0.0) {
        return Ok(None);
    }
    let f = |tau: f64| finite_tau_dx(tau, mass, d_p).map(|v| v - target);
    let mut hi = 1.0;
    while f(hi)? < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DxReport {
    pub d_x_gkls_min: f64,
    pub d_x_msqr_fit: f64,
    pub d_x_msqr_fit_error: f64,
    pub d_x_finite_tau: f64,
    pub tau: f64,
    /// Which intercollision time `tau` refers to.
    pub tau_source: String,
    /// `τ` at which the finite-τ value equals the complete-positivity minimum.
    pub crossover_tau: Option<f64>,
    pub collision_rate: f64,
    pub params: PhysicalParams,
    pub divergence_scan: Vec<DivergenceRow>,
}

/// Inputs to [`compare_dx_models`] beyond the physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DxComparison<'a> {
    pub tau: f64,
    pub tau_source: &'a str,
    pub psi: &'a MoleculePacket,
    pub collision_rate: f64,
    pub grid: &'a Grid,
    pub scan_widths: &'a [f64],
    pub scan_lattice: MomentumLattice,
}

/// Collects the three position-diffusion candidates and the divergence scan
/// into one report without ranking them.
pub fn compare_dx_models(params: &PhysicalParams, inputs: &DxComparison<'_>) -> Result<DxReport> {
    let (big, small) = (params.dust_mass, params.molecule_mass);
    let d_x_gkls_min = gkls_min_dx(params)?;
    let fit = extract_dx_from_collisions(inputs.psi, big, small, inputs.collision_rate, inputs.grid)?;
    let d_x_finite_tau = finite_tau_dx(inputs.tau, big, params.d_p)?;
    let crossover = crossover_tau(big, params.d_p, d_x_gkls_min)?;
    let scan = cmd_divergence_scan(
        inputs.scan_widths,
        big,
        small,
        inputs.collision_rate,
        inputs.grid,
        inputs.scan_lattice,
    )?;
    Ok(DxReport {
        d_x_gkls_min,
        d_x_msqr_fit: fit.d_x_fit,
        d_x_msqr_fit_error: fit.fit_error,
        d_x_finite_tau,
        tau: inputs.tau,
        tau_source: inputs.tau_source.to_string(),
        crossover_tau: crossover,
        collision_rate: inputs.collision_rate,
        params: *params,
        divergence_scan: scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_tau_examples() {
        assert_eq!(finite_tau_dx(0.0, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(finite_tau_dx(1.0, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(finite_tau_dx(2.0, 4.0, 3.0).unwrap(), 1.0);
        assert!(finite_tau_dx(-1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn crossover_solves_equality() {
        let tau = crossover_tau(3.0, 2.0, 0.7).unwrap().unwrap();
        let back = finite_tau_dx(tau, 3.0, 2.0).unwrap();
        assert!((back / 0.7 - 1.0).abs() < 1e-12);
        assert_eq!(crossover_tau(3.0, 2.0, 0.0).unwrap(), Some(0.0));
        assert_eq!(crossover_tau(3.0, 0.0, 1.0).unwrap(), None);
        let tiny = crossover_tau(1.0, 1.0, 1e-20).unwrap().unwrap();
        assert!((finite_tau_dx(tiny, 1.0, 1.0).unwrap() / 1e-20 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn friction_from_rate() {
        assert_eq!(friction_from_collision_rate(3.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn scan_rejects_unrepresentable_width() {
        let grid = Grid::new(64, 40.0, 1.0).unwrap();
        let lattice = MomentumLattice::centered(1024, 1e-3).unwrap();
        assert!(cmd_divergence_scan(&[1e-4], 100.0, 1.0, 1.0, &grid, lattice).is_err());
        assert!(cmd_divergence_scan(&[], 100.0, 1.0, 1.0, &grid, lattice).is_err());
    }

    #[test]
    fn monotonicity_check() {
        let row = |width: f64, d: f64| DivergenceRow {
            width,
            d_x_fit: Some(d),
            fit_error: Some(0.0),
            points_used: 1,
            overlap_at_min_dp: None,
            flag: None,
        };
        assert!(scan_is_monotone(&[row(1.0, 1.0), row(0.5, 4.0)]));
        assert!(!scan_is_monotone(&[row(1.0, 5.0), row(0.5, 4.0)]));
    }
}
