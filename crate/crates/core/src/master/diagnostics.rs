use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DensityMatrixState, GeneratorKind, GeneratorSpec, Hamiltonian, Representation};
use crate::error::{invalid, Error, Result};
use crate::fft::Spectral2d;
use crate::C64;

/// First and second central moments; `v_xp` is the symmetrized covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub v_xx: f64,
    pub v_xp: f64,
    pub v_pp: f64,
}

impl Moments {
    /// `V_xx V_pp - V_xp²`, bounded below by `ħ²/4` for physical states.
    pub fn uncertainty_product(&self) -> f64 {
        self.v_xx * self.v_pp - self.v_xp * self.v_xp
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.mean_x, self.mean_p, self.v_xx, self.v_xp, self.v_pp]
    }
}

/// Moments through operator traces. Position-representation states use the
/// spectral momentum operator; momentum-representation states use the dense
/// transformed position operator.
pub fn moments(rho: &DensityMatrixState) -> Moments {
    match rho.rep {
        Representation::Position => position_moments(rho),
        Representation::Momentum => momentum_moments(rho),
    }
}

fn position_moments(rho: &DensityMatrixState) -> Moments {
    let grid = rho.grid;
    let n = grid.points;
    let xs = grid.positions();
    let px = rho.diagonal_probabilities();
    let (mean_x, v_xx) = mean_var(&xs, &px);

    let spectral = Spectral2d::new(n);
    let mut rho_p = rho.values.clone();
    spectral.to_momentum(&mut rho_p);
    let ps = grid.momenta_fft_order();
    let pp: Vec<f64> = rho_p.diag().iter().map(|z| z.re).collect();
    let (mean_p, v_pp) = mean_var(&ps, &pp);

    // (P ρ) via column transforms; only its diagonal enters tr(X P ρ).
    let mut p_rho = rho.values.clone();
    spectral.columns(&mut p_rho, true);
    for (b, mut row) in p_rho.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|z| z * ps[b]);
    }
    spectral.columns(&mut p_rho, false);
    let xp: f64 = (0..n).map(|i| xs[i] * p_rho[[i, i]].re).sum();

    Moments {
        mean_x,
        mean_p,
        v_xx,
        v_xp: xp - mean_x * mean_p,
        v_pp,
    }
}

fn momentum_moments(rho: &DensityMatrixState) -> Moments {
    let grid = rho.grid;
    let n = grid.points;
    let ps = grid.momenta();
    let probs = rho.diagonal_probabilities();
    let (mean_p, v_pp) = mean_var(&ps, &probs);

    let x_diag = Array2::from_diag(&ndarray::Array1::from_iter(grid.positions().into_iter().map(|x| C64::new(x, 0.0))));
    let x_mom = DensityMatrixState {
        values: x_diag,
        rep: Representation::Position,
        grid,
    }
    .to_momentum()
    .values;
    let x2_mom = x_mom.dot(&x_mom);
    let r = &rho.values;
    let mut tr_x = C64::new(0.0, 0.0);
    let mut tr_x2 = C64::new(0.0, 0.0);
    let mut tr_xp = C64::new(0.0, 0.0);
    for j in 0..n {
        for l in 0..n {
            tr_x += x_mom[[j, l]] * r[[l, j]];
            tr_x2 += x2_mom[[j, l]] * r[[l, j]];
            tr_xp += x_mom[[j, l]] * ps[l] * r[[l, j]];
        }
    }
    let mean_x = tr_x.re;
    Moments {
        mean_x,
        mean_p,
        v_xx: tr_x2.re - mean_x * mean_x,
        v_xp: tr_xp.re - mean_x * mean_p,
        v_pp,
    }
}

fn mean_var(values: &[f64], probs: &[f64]) -> (f64, f64) {
    let total: f64 = probs.iter().sum();
    let mean = values.iter().zip(probs).map(|(v, p)| v * p).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(probs)
        .map(|(v, p)| (v - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    (mean, var)
}

/// Integrates the closed moment equations of the free-particle QFPE:
///
/// ```text
/// d⟨x⟩/dt = ⟨p⟩/M           d⟨p⟩/dt = -η⟨p⟩
/// dV_xx/dt = 2V_xp/M + 2D_x  dV_xp/dt = V_pp/M - ηV_xp
/// dV_pp/dt = -2ηV_pp + 2D_p
/// ```
pub fn moment_ode_oracle(init: Moments, spec: &GeneratorSpec, t: f64) -> Result<Moments> {
    if spec.kind != GeneratorKind::Qfpe {
        return Err(invalid("moment oracle requires a qfpe generator"));
    }
    if spec.hamiltonian != Hamiltonian::Free || spec.suppress_hamiltonian {
        return Err(invalid("moment oracle covers the free-particle Hamiltonian only"));
    }
    if !(t >= 0.0) {
        return Err(invalid("t must be non-negative"));
    }
    let (m, eta, d_p, d_x) = (spec.mass, spec.eta, spec.d_p, spec.d_x);
    let f = |y: [f64; 5]| -> [f64; 5] {
        let [_x, p, _vxx, vxp, vpp] = y;
        [
            p / m,
            -eta * p,
            2.0 * vxp / m + 2.0 * d_x,
            vpp / m - eta * vxp,
            -2.0 * eta * vpp + 2.0 * d_p,
        ]
    };
    let rate = eta.max(1.0 / m).max(1e-12);
    let steps = ((t * rate / 1e-3).ceil() as usize).max(2000);
    let h = t / steps as f64;
    let mut y = init.as_array();
    let axpy = |a: [f64; 5], s: f64, b: [f64; 5]| -> [f64; 5] { std::array::from_fn(|i| a[i] + s * b[i]) };
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(axpy(y, 0.5 * h, k1));
        let k3 = f(axpy(y, 0.5 * h, k2));
        let k4 = f(axpy(y, h, k3));
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    Ok(Moments {
        mean_x: y[0],
        mean_p: y[1],
        v_xx: y[2],
        v_xp: y[3],
        v_pp: y[4],
    })
}

/// 1/e decay length of `|ρ(x_c + s/2, x_c - s/2)|` along the antidiagonal
/// through the peak of the position distribution.
///
/// The crossing is located by interpolating `ln|ρ|` linearly in `s²`, which is
/// exact for Gaussian coherence profiles. A fully diagonal matrix returns 0.
pub fn coherence_length(rho: &DensityMatrixState) -> Result<f64> {
    rho.require(Representation::Position)?;
    let n = rho.points();
    let dx = rho.grid.dx();
    let diag = rho.diagonal_probabilities();
    let c = diag
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let peak = diag[c];
    if !(peak > 0.0) {
        return Err(Error::FitFailure("no positive diagonal weight".into()));
    }
    let target = -1.0f64;
    let mut prev = (0.0f64, 0.0f64); // (s², ln g)
    for j in 1..n {
        if j > c || c + j >= n {
            break;
        }
        let s = 2.0 * j as f64 * dx;
        let g = rho.values[[c + j, c - j]].norm() / peak;
        let ln_g = g.ln();
        if ln_g < target {
            if ln_g == f64::NEG_INFINITY {
                return Ok(prev.0.sqrt());
            }
            let frac = (target - prev.1) / (ln_g - prev.1);
            return Ok((prev.0 + frac * (s * s - prev.0)).sqrt());
        }
        prev = (s * s, ln_g);
    }
    Err(Error::FitFailure(
        "coherence profile never falls below 1/e inside the grid".into(),
    ))
}
