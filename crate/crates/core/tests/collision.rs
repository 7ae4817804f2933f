use nalgebra::Vector3;
use proptest::prelude::*;
use qbm_core::classical::member_rng;
use qbm_core::collision::{
    apply_collision_to_dust, branch_shift, collide_1d, collide_3d_elastic, decoherence_factor, MoleculePacket,
};
use qbm_core::lattice::MomentumLattice;
use qbm_core::master::{DensityMatrixState, Grid};
use qbm_core::C64;
use rand::Rng;

fn energy(p: f64, k: f64, big: f64, small: f64) -> f64 {
    p * p / (2.0 * big) + k * k / (2.0 * small)
}

proptest! {
    #[test]
    fn one_d_collision_conserves(p in -50.0f64..50.0, k in -50.0f64..50.0, big in 0.1f64..1e3, small in 0.1f64..10.0) {
        let out = collide_1d(p, k, big, small).unwrap();
        let scale = p.abs() + k.abs() + 1e-300;
        prop_assert!((out.p_f + out.k_f - p - k).abs() <= 1e-12 * scale);
        let e0 = energy(p, k, big, small);
        prop_assert!((energy(out.p_f, out.k_f, big, small) - e0).abs() <= 1e-12 * e0.max(1e-300));
    }

    #[test]
    fn one_d_collision_is_an_involution(p in -50.0f64..50.0, k in -50.0f64..50.0, big in 0.1f64..1e3, small in 0.1f64..10.0) {
        let once = collide_1d(p, k, big, small).unwrap();
        let twice = collide_1d(once.p_f, once.k_f, big, small).unwrap();
        let scale = p.abs() + k.abs();
        prop_assert!((twice.p_f - p).abs() <= 1e-12 * scale);
        prop_assert!((twice.k_f - k).abs() <= 1e-12 * scale);
    }

    #[test]
    fn three_d_collision_conserves(
        p in prop::array::uniform3(-10.0f64..10.0),
        k in prop::array::uniform3(-10.0f64..10.0),
        dir in prop::array::uniform3(-1.0f64..1.0),
        big in 0.5f64..100.0,
    ) {
        let n = Vector3::from(dir);
        prop_assume!(n.norm() > 1e-3);
        let (p, k) = (Vector3::from(p), Vector3::from(k));
        let (pf, kf) = collide_3d_elastic(p, k, n.normalize(), big, 1.0).unwrap();
        prop_assert!((pf + kf - p - k).norm() <= 1e-12 * (p.norm() + k.norm()));
        let e0 = p.norm_squared() / (2.0 * big) + k.norm_squared() / 2.0;
        let e1 = pf.norm_squared() / (2.0 * big) + kf.norm_squared() / 2.0;
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0);
    }
}

/// `ψ(k) = N exp(-(k-k0)²/(4σ²) + i a k)` evaluated in closed form.
fn analytic_packet(k: f64, k0: f64, sigma: f64, a: f64) -> C64 {
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    C64::from_polar(norm * (-(k - k0).powi(2) / (4.0 * sigma * sigma)).exp(), a * k)
}

#[test]
fn decoherence_factor_matches_refined_quadrature() {
    let (k0, sigma, a) = (0.3, 0.8, 1.7);
    let lattice = MomentumLattice::with_half_span(512, 10.0).unwrap();
    let amps = lattice.values().iter().map(|&k| analytic_packet(k, k0, sigma, a)).collect();
    let psi = MoleculePacket::normalized(lattice, amps).unwrap();
    let (big, small) = (7.0, 1.0);
    let fine = lattice.refined(4);
    for dp in [0.05, 0.4, 1.3, -2.2] {
        let got = decoherence_factor(dp, 0.0, &psi, big, small).unwrap().value;
        let s = branch_shift(dp, big, small);
        let oracle: C64 = fine
            .values()
            .iter()
            .map(|&k| analytic_packet(k, k0, sigma, a) * analytic_packet(k + s, k0, sigma, a).conj())
            .sum::<C64>()
            * fine.spacing;
        assert!((got - oracle).norm() < 1e-8, "Δp = {dp}: {got} vs {oracle}");
    }
}

#[test]
fn decoherence_factor_ignores_global_phase_and_depends_on_difference() {
    let lattice = MomentumLattice::with_half_span(256, 6.0).unwrap();
    let psi = MoleculePacket::gaussian(lattice, 0.1, 0.6).unwrap();
    let rotated = psi.with_global_phase(2.1);
    let a = decoherence_factor(1.0, 0.2, &psi, 20.0, 1.0).unwrap().value;
    let b = decoherence_factor(1.0, 0.2, &rotated, 20.0, 1.0).unwrap().value;
    let c = decoherence_factor(3.8, 3.0, &psi, 20.0, 1.0).unwrap().value;
    assert!((a - b).norm() < 1e-14);
    assert!((a - c).norm() < 1e-12);
}

#[test]
fn gaussian_overlap_closed_form() {
    let sigma = 0.5;
    let lattice = MomentumLattice::with_half_span(1024, 8.0).unwrap();
    let psi = MoleculePacket::gaussian(lattice, 0.0, sigma).unwrap();
    let (big, small) = (30.0, 2.0);
    for dp in [0.1, 1.0, 5.0] {
        let s = branch_shift(dp, big, small);
        let d = decoherence_factor(dp, 0.0, &psi, big, small).unwrap().value;
        let expected = (-s * s / (8.0 * sigma * sigma)).exp();
        assert!((d.re - expected).abs() < 1e-12 && d.im.abs() < 1e-12);
    }
}

#[test]
fn equal_masses_are_rejected_for_overlaps() {
    let lattice = MomentumLattice::with_half_span(64, 4.0).unwrap();
    let psi = MoleculePacket::gaussian(lattice, 0.0, 0.5).unwrap();
    assert!(decoherence_factor(1.0, 0.0, &psi, 1.0, 1.0).is_err());
}

#[test]
fn packet_position_representation_is_normalized() {
    let lattice = MomentumLattice::with_half_span(256, 6.0).unwrap();
    let psi = MoleculePacket::gaussian(lattice, 0.5, 0.7).unwrap();
    let (xs, amps) = psi.position_representation(1.0);
    let dx = xs[1] - xs[0];
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
    assert!((norm - 1.0).abs() < 1e-10);
}

fn dust_state() -> DensityMatrixState {
    let grid = Grid::new(64, 30.0, 1.0).unwrap();
    DensityMatrixState::gaussian(grid, 1.0, 0.4, 1.5).unwrap().to_momentum()
}

#[test]
fn mean_dust_momentum_after_collision() {
    let rho = dust_state();
    let lattice = MomentumLattice::with_half_span(512, 3.0).unwrap();
    let (k0, sigma, big, small) = (0.6, 0.3, 5.0, 1.0);
    let psi = MoleculePacket::gaussian(lattice, k0, sigma).unwrap();
    let out = apply_collision_to_dust(&rho, &psi, big, small).unwrap();
    let ps = rho.grid.momenta();
    let mean = |probs: &[f64]| probs.iter().zip(&ps).map(|(w, p)| w * p).sum::<f64>();
    let p_in = mean(&rho.diagonal_probabilities());
    let p_out = mean(&out.diagonal_probabilities());
    let exact = (p_in * (big - small) + 2.0 * big * psi.mean()) / (big + small);
    assert!((p_out - exact).abs() < 1e-8, "{p_out} vs {exact}");

    // Monte Carlo over the classical collision with the same marginals.
    let probs = rho.diagonal_probabilities();
    let mut rng = member_rng(11, 0);
    let n = 200_000;
    let mut acc = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut c = 0.0;
        let idx = probs.iter().position(|w| {
            c += w;
            c >= u
        });
        let p = ps[idx.unwrap_or(ps.len() - 1)];
        let k = k0 + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        acc.push(collide_1d(p, k, big, small).unwrap().p_f);
    }
    let m = acc.iter().sum::<f64>() / n as f64;
    let se = (acc.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
    assert!((p_out - m).abs() < 3.0 * se, "{p_out} vs MC {m} ± {se}");
}

#[test]
fn delta_like_packet_destroys_momentum_coherence() {
    let grid = Grid::new(32, 20.0, 1.0).unwrap();
    let rho = DensityMatrixState::gaussian(grid, 0.0, 0.0, 0.6).unwrap().to_momentum();
    let lattice = MomentumLattice::centered(1024, 0.002).unwrap();
    let psi = MoleculePacket::gaussian(lattice, 0.0, 0.004).unwrap();
    let out = apply_collision_to_dust(&rho, &psi, 10.0, 1.0).unwrap();
    let n = grid.points;
    let peak = (0..n).map(|i| out.values[[i, i]].re).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(out.values[[i, j]].norm() / peak);
            }
        }
    }
    let input_coherence = rho.values[[n / 2, n / 2 + 1]].norm() / rho.values[[n / 2, n / 2]].norm();
    assert!(input_coherence > 0.5);
    assert!(worst < 1e-3, "residual coherence {worst:.3e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn collision_map_is_trace_preserving_and_positive(
        big in 2.0f64..50.0,
        sigma in 0.05f64..0.4,
        k0 in -0.3f64..0.3,
        x0 in -2.0f64..2.0,
        p0 in -1.0f64..1.0,
    ) {
        let grid = Grid::new(128, 48.0, 1.0).unwrap();
        let rho = DensityMatrixState::gaussian(grid, x0, p0, 2.0).unwrap().to_momentum();
        let lattice = MomentumLattice::with_half_span(256, 3.0).unwrap();
        let psi = MoleculePacket::gaussian(lattice, k0, sigma).unwrap();
        let out = apply_collision_to_dust(&rho, &psi, big, 1.0).unwrap();
        prop_assert!((out.trace() - 1.0).norm() < 1e-8);
        prop_assert!(out.hermiticity_error() < 1e-12);
        prop_assert!(out.min_eigenvalue() > -1e-8);
    }
}
