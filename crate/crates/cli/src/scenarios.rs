//! The scenario catalog and the code behind each entry.

use anyhow::{Context, Result};
use qbm_core::classical::{collision_gas_simulate, fit_friction_diffusion, GasModel, RateModel};
use qbm_core::coefficients::{
    cmd_divergence_scan, compare_dx_models, extract_dx_from_collisions, DivergenceRow, DxComparison, DxReport,
};
use qbm_core::collision::{apply_collision_to_dust, decoherence_factor, MoleculePacket};
use qbm_core::lattice::MomentumLattice;
use qbm_core::master::{
    coherence_length, moment_ode_oracle, moments, propagate_with, DensityMatrixState, Generator, GeneratorSpec,
    Grid, Moments,
};
use qbm_core::msqr::{msqr_wave_packet, ThermalSpec};
use qbm_core::physical::{check_gkls, gkls_min_dx};
use serde::{Deserialize, Serialize};

use crate::config::{Config, Scenario};
use crate::output::{Cell, Table};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    /// Model equations the scenario exercises.
    pub equations: Vec<String>,
}

pub fn catalog() -> Vec<CatalogEntry> {
    Scenario::ALL
        .iter()
        .map(|&s| {
            let (description, equations): (&str, &[&str]) = match s {
                Scenario::JzDephasing => (
                    "Pure positional decoherence of a Gaussian packet against the analytic dephasing factor",
                    &["positional decoherence master equation", "analytic solution exp(-Λ(x-x')²t)"],
                ),
                Scenario::QfpeMoments => (
                    "Quantum Fokker-Planck propagation tracked against the closed moment equations",
                    &["quantum Fokker-Planck equation", "classical Fokker-Planck correspondence"],
                ),
                Scenario::GklsWitness => (
                    "Minimum eigenvalue at the complete-positivity bound and with D_x = 0 for a squeezed state",
                    &["quantum Fokker-Planck equation", "complete-positivity bound D_x ≥ ħ²η²/(4D_p)"],
                ),
                Scenario::CmdScan => (
                    "Fitted D_x from single collisions as the molecule packet narrows",
                    &["decoherence factor of one collision", "complete momentum decoherence limit"],
                ),
                Scenario::MsqrCollision => (
                    "Square-root thermal molecule packet: decoherence factor, D_x fit and one collision on the dust",
                    &["square-root thermal state", "decoherence factor of one collision", "elastic collision kinematics"],
                ),
                Scenario::ClassicalFd => (
                    "Classical collision-gas Monte Carlo and the fluctuation-dissipation ratio",
                    &["fluctuation-dissipation relation D_p = ηMk_BT", "classical Fokker-Planck equation"],
                ),
                Scenario::DxCompare => (
                    "Side-by-side report of the candidate position-diffusion coefficients",
                    &[
                        "complete-positivity bound D_x ≥ ħ²η²/(4D_p)",
                        "square-root thermal state",
                        "finite intercollision time D_x = (1/3)(τ²/M)D_p",
                    ],
                ),
            };
            CatalogEntry {
                name: s.name().to_string(),
                description: description.to_string(),
                equations: equations.iter().map(|e| e.to_string()).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, limit: impl Into<String>, passed: bool) -> Check {
    Check {
        name,
        value,
        limit: limit.into(),
        passed,
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub report: Option<DxReport>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["check", "value", "limit", "passed"]);
        for c in &self.checks {
            t.push(vec![
                Cell::Text(c.name.to_string()),
                c.value.into(),
                Cell::Text(c.limit.clone()),
                c.passed.into(),
            ]);
        }
        t
    }
}

pub fn run(cfg: &Config) -> Result<Outcome> {
    match cfg.scenario {
        Scenario::JzDephasing => jz_dephasing(cfg),
        Scenario::QfpeMoments => qfpe_moments(cfg),
        Scenario::GklsWitness => gkls_witness(cfg),
        Scenario::CmdScan => cmd_scan(cfg),
        Scenario::MsqrCollision => msqr_collision(cfg),
        Scenario::ClassicalFd => classical_fd(cfg),
        Scenario::DxCompare => dx_compare(cfg),
    }
    .with_context(|| format!("scenario {}", cfg.scenario.name()))
}

fn grid(cfg: &Config) -> Result<Grid> {
    Ok(Grid::new(cfg.grid.points, cfg.grid.length, cfg.physics.hbar)?)
}

fn initial_state(cfg: &Config, grid: Grid) -> Result<DensityMatrixState> {
    Ok(DensityMatrixState::gaussian(grid, cfg.state.x0, cfg.state.p0, cfg.sigma())?)
}

fn jz_dephasing(cfg: &Config) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let lambda = cfg.physics.lambda;
    let rho0 = initial_state(cfg, grid)?;
    let generator = Generator::new(grid, GeneratorSpec::jz(lambda, cfg.physics.dust_mass).dephasing_only())?;
    let xs = grid.positions();
    let peak = rho0.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut table = Table::new("dephasing", &["t", "max_relative_error", "trace", "coherence_length"]);
    let mut worst: f64 = 0.0;
    let mut trace_drift: f64 = 0.0;
    let it = &cfg.integrator;
    propagate_with(&rho0, &generator, it.dt, it.t_end, it.record_every, |_, t, state| {
        let mut err: f64 = 0.0;
        for ((i, j), v) in state.values.indexed_iter() {
            let v0 = rho0.values[[i, j]];
            if v0.norm() < 1e-6 * peak {
                continue;
            }
            let exact = v0 * (-lambda * (xs[i] - xs[j]).powi(2) * t).exp();
            err = err.max((v - exact).norm() / exact.norm());
        }
        worst = worst.max(err);
        let tr = state.trace().re;
        trace_drift = trace_drift.max((tr - 1.0).abs());
        table.push(vec![t.into(), err.into(), tr.into(), coherence_length(state).ok().into()]);
        Ok(())
    })?;
    Ok(Outcome {
        tables: vec![table],
        checks: vec![
            check("max relative error vs analytic dephasing", worst, "<= 1e-4", worst <= 1e-4),
            check("trace drift", trace_drift, "<= 1e-6", trace_drift <= 1e-6),
        ],
        report: None,
    })
}

/// `|got - want| / (|want| + natural scale)` for each moment.
fn moment_error(got: &Moments, want: &Moments) -> f64 {
    let scales = [
        want.v_xx.sqrt(),
        want.v_pp.sqrt(),
        want.v_xx,
        (want.v_xx * want.v_pp).sqrt(),
        want.v_pp,
    ];
    got.as_array()
        .iter()
        .zip(want.as_array())
        .zip(scales)
        .map(|((g, w), s)| (g - w).abs() / (w.abs() + s))
        .fold(0.0, f64::max)
}

fn qfpe_moments(cfg: &Config) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let spec = GeneratorSpec::qfpe(params.d_p, params.eta, params.d_x, params.dust_mass);
    let generator = Generator::new(grid, spec)?;
    let rho0 = initial_state(cfg, grid)?;
    let init = moments(&rho0);
    let mut table = Table::new(
        "moments",
        &[
            "t",
            "trace",
            "min_eigenvalue",
            "mean_x",
            "mean_p",
            "v_xx",
            "v_xp",
            "v_pp",
            "coherence_length",
            "oracle_mean_x",
            "oracle_mean_p",
            "oracle_v_xx",
            "oracle_v_xp",
            "oracle_v_pp",
            "max_relative_error",
        ],
    );
    let (mut worst, mut trace_drift, mut herm, mut min_eig) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let it = &cfg.integrator;
    propagate_with(&rho0, &generator, it.dt, it.t_end, it.record_every, |_, t, state| {
        let m = moments(state);
        let o = moment_ode_oracle(init, &spec, t)?;
        let err = moment_error(&m, &o);
        let tr = state.trace().re;
        let eig = state.min_eigenvalue();
        worst = worst.max(err);
        trace_drift = trace_drift.max((tr - 1.0).abs());
        herm = herm.max(state.hermiticity_error());
        min_eig = min_eig.min(eig);
        let mut row: Vec<Cell> = vec![t.into(), tr.into(), eig.into()];
        row.extend(m.as_array().map(Cell::from));
        row.push(coherence_length(state).ok().into());
        row.extend(o.as_array().map(Cell::from));
        row.push(err.into());
        table.push(row);
        Ok(())
    })?;
    let mut checks = vec![
        check("max relative moment error", worst, "<= 1e-3", worst <= 1e-3),
        check("trace drift", trace_drift, "<= 1e-6", trace_drift <= 1e-6),
        check("hermiticity error", herm, "<= 1e-10", herm <= 1e-10),
    ];
    if check_gkls(&params)?.satisfied {
        checks.push(check("min eigenvalue", min_eig, ">= -1e-6", min_eig >= -1e-6));
    }
    Ok(Outcome {
        tables: vec![table],
        checks,
        report: None,
    })
}

fn gkls_witness(cfg: &Config) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let bound = gkls_min_dx(&params)?;
    let rho0 = initial_state(cfg, grid)?;
    let it = &cfg.integrator;
    let eigen_run = |d_x: f64| -> Result<Vec<(f64, f64)>> {
        let generator = Generator::new(grid, GeneratorSpec::qfpe(params.d_p, params.eta, d_x, params.dust_mass))?;
        let mut rows = Vec::new();
        propagate_with(&rho0, &generator, it.dt, it.t_end, it.record_every, |_, t, state| {
            rows.push((t, state.min_eigenvalue()));
            Ok(())
        })?;
        Ok(rows)
    };
    let (at_bound, without) = rayon::join(|| eigen_run(bound), || eigen_run(0.0));
    let (at_bound, without) = (at_bound?, without?);
    let mut table = Table::new("min_eigenvalue", &["t", "at_bound", "without_dx"]);
    for (a, b) in at_bound.iter().zip(&without) {
        table.push(vec![a.0.into(), a.1.into(), b.1.into()]);
    }
    // The initial state is pure, so only the evolved states are informative.
    let min_at_bound = at_bound[1..].iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let min_without = without[1..].iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        tables: vec![table],
        checks: vec![
            check("min eigenvalue at the bound", min_at_bound, ">= -1e-6", min_at_bound >= -1e-6),
            check("min eigenvalue with D_x = 0", min_without, "< -1e-4", min_without < -1e-4),
        ],
        report: None,
    })
}

fn scan_lattice(cfg: &Config) -> Result<MomentumLattice> {
    Ok(MomentumLattice::centered(
        cfg.collision.lattice_points,
        cfg.collision.lattice_spacing,
    )?)
}

fn divergence_table(rows: &[DivergenceRow]) -> Table {
    let mut table = Table::new(
        "divergence",
        &["width", "d_x_fit", "fit_error", "points_used", "overlap_at_min_dp", "flag"],
    );
    for r in rows {
        table.push(vec![
            r.width.into(),
            r.d_x_fit.into(),
            r.fit_error.into(),
            r.points_used.into(),
            r.overlap_at_min_dp.into(),
            r.flag.clone().into(),
        ]);
    }
    table
}

fn cmd_scan(cfg: &Config) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let ph = &cfg.physics;
    let lattice = scan_lattice(cfg)?;
    let rows = cmd_divergence_scan(
        &cfg.collision.widths,
        ph.dust_mass,
        ph.molecule_mass,
        cfg.collision.rate,
        &grid,
        lattice,
    )?;
    let narrowest = cfg.collision.widths.iter().copied().fold(f64::INFINITY, f64::min);
    let psi = MoleculePacket::gaussian(lattice, 0.0, narrowest)?;
    let overlap = decoherence_factor(grid.dp(), 0.0, &psi, ph.dust_mass, ph.molecule_mass)?.value.norm();

    let mut by_width: Vec<&DivergenceRow> = rows.iter().collect();
    by_width.sort_by(|a, b| b.width.total_cmp(&a.width));
    let fitted: Vec<f64> = by_width.iter().map(|r| r.d_x_fit.unwrap_or(f64::NAN)).collect();
    let increasing = fitted.windows(2).all(|w| w[1] > w[0]);
    Ok(Outcome {
        tables: vec![divergence_table(&rows)],
        checks: vec![
            check("|D| at smallest separation, narrowest packet", overlap, "< 1e-3", overlap < 1e-3),
            check(
                "D_x strictly increasing as width decreases",
                f64::from(u8::from(increasing)),
                "1",
                increasing,
            ),
        ],
        report: None,
    })
}

fn thermal_packet(cfg: &Config) -> Result<(ThermalSpec, MoleculePacket)> {
    let ph = &cfg.physics;
    let spec = ThermalSpec::new(ph.molecule_mass, ph.temperature, ph.k_b, ph.hbar)?
        .with_convention(cfg.collision.convention);
    let psi = msqr_wave_packet(&spec, spec.default_lattice()?)?;
    Ok((spec, psi))
}

fn msqr_collision(cfg: &Config) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let (big, small, hbar, rate) = (params.dust_mass, params.molecule_mass, params.hbar, cfg.collision.rate);
    let (spec, psi) = thermal_packet(cfg)?;
    let fit = extract_dx_from_collisions(&psi, big, small, rate, &grid)?;
    // Gaussian overlap: -ln D = s²/(8σ_k²) with s = 2mΔp/(M-m).
    let c = (2.0 * small / (big - small)).powi(2) / (8.0 * spec.momentum_variance());
    let analytic = c * hbar * hbar * rate;
    let bound = gkls_min_dx(&params)?;

    let mut overlaps = Table::new("overlaps", &["delta_p", "abs_overlap", "neg_log_overlap", "gaussian_model"]);
    for j in 0..=16 {
        let dp = j as f64 * grid.dp();
        let d = decoherence_factor(dp, 0.0, &psi, big, small)?.value.norm();
        overlaps.push(vec![dp.into(), d.into(), (-d.ln()).into(), (c * dp * dp).into()]);
    }

    let rho = initial_state(cfg, grid)?.to_momentum();
    let after = apply_collision_to_dust(&rho, &psi, big, small)?;
    let trace_error = (after.trace().re - 1.0).abs();
    let min_eig = after.min_eigenvalue();
    let mean_before = moments(&rho).mean_p;
    let mean_after = moments(&after).mean_p;
    let expected = mean_before + 2.0 * (big * psi.mean() - small * mean_before) / (big + small);
    let mean_error = (mean_after - expected).abs();

    let mut summary = Table::new(
        "fit",
        &[
            "d_x_fit",
            "fit_error",
            "d_x_analytic",
            "d_x_gkls_min",
            "points_used",
            "mean_p_before",
            "mean_p_after",
            "dust_min_eigenvalue",
        ],
    );
    summary.push(vec![
        fit.d_x_fit.into(),
        fit.fit_error.into(),
        analytic.into(),
        bound.into(),
        fit.points_used.into(),
        mean_before.into(),
        mean_after.into(),
        min_eig.into(),
    ]);
    let rel = (fit.d_x_fit / analytic - 1.0).abs();
    let margin = fit.d_x_fit + fit.fit_error - bound;
    Ok(Outcome {
        tables: vec![overlaps, summary],
        checks: vec![
            check("D_x fit vs Gaussian-overlap oracle (relative)", rel, "<= 2e-2", rel <= 2e-2),
            check("D_x fit minus complete-positivity minimum", margin, ">= 0", margin >= 0.0),
            check("dust trace after one collision", trace_error, "<= 1e-9", trace_error <= 1e-9),
            check("dust min eigenvalue after one collision", min_eig, ">= -1e-10", min_eig >= -1e-10),
            check("mean momentum vs kinematics", mean_error, "<= 1e-8", mean_error <= 1e-8),
        ],
        report: None,
    })
}

fn gas_model(cfg: &Config) -> GasModel {
    GasModel {
        molecule_mass: cfg.physics.molecule_mass,
        temperature: cfg.physics.temperature,
        k_b: cfg.physics.k_b,
        rate: cfg.gas.rate,
    }
}

fn classical_fd(cfg: &Config) -> Result<Outcome> {
    let big = cfg.physics.dust_mass;
    let gas = gas_model(cfg);
    let traj = collision_gas_simulate(big, cfg.gas.p0, &gas, cfg.gas.collisions, cfg.seed)?;
    let fit = fit_friction_diffusion(&traj)?;
    let kt = gas.k_b * gas.temperature;
    let ratio = fit.d_p / (fit.eta * big * kt);

    let mut summary = Table::new("fit", &["eta", "eta_se", "d_p", "d_p_se", "max_lag", "ratio"]);
    summary.push(vec![
        fit.eta.into(),
        fit.eta_se.into(),
        fit.d_p.into(),
        fit.d_p_se.into(),
        fit.max_lag.into(),
        ratio.into(),
    ]);
    let mut trajectory = Table::new("trajectory", &["t", "p"]);
    for (i, (t, p)) in traj.times.iter().zip(&traj.p[0]).enumerate() {
        if i % cfg.integrator.record_every == 0 {
            trajectory.push(vec![(*t).into(), (*p).into()]);
        }
    }
    Ok(Outcome {
        tables: vec![summary, trajectory],
        checks: vec![check(
            "D_p / (η M k_B T)",
            ratio,
            "in [0.9, 1.1]",
            (0.9..=1.1).contains(&ratio),
        )],
        report: None,
    })
}

fn dx_compare(cfg: &Config) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let (_, psi) = thermal_packet(cfg)?;
    let (tau, tau_source) = match cfg.gas.rate {
        RateModel::FixedRate { tau } => (tau, "fixed-rate"),
        RateModel::FluxWeighted { .. } => (
            1.0 / gas_model(cfg).collision_rate(params.dust_mass, 0.0),
            "flux-weighted mean intercollision time at rest",
        ),
    };
    let report = compare_dx_models(
        &params,
        &DxComparison {
            tau,
            tau_source,
            psi: &psi,
            collision_rate: cfg.collision.rate,
            grid: &grid,
            scan_widths: &cfg.collision.widths,
            scan_lattice: scan_lattice(cfg)?,
        },
    )?;
    let values = [
        ("d_x_gkls_min", report.d_x_gkls_min),
        ("d_x_msqr_fit", report.d_x_msqr_fit),
        ("d_x_finite_tau", report.d_x_finite_tau),
    ];
    let mut summary = Table::new("dx", &["model", "d_x"]);
    for (name, v) in values {
        summary.push(vec![Cell::Text(name.to_string()), v.into()]);
    }
    let worst = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let all_ok = values.iter().all(|v| v.1.is_finite() && v.1 >= 0.0);
    Ok(Outcome {
        tables: vec![summary, divergence_table(&report.divergence_scan)],
        checks: vec![check("smallest D_x candidate", worst, ">= 0 and finite", all_ok)],
        report: Some(report),
    })
}
