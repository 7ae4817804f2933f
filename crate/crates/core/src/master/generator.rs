use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{DensityMatrixState, Grid, Representation};
use crate::error::{invalid, Result};
use crate::fft::Spectral2d;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Unitary motion plus positional decoherence `-Λ[X,[X,ρ]]`.
    Jz,
    /// Quantum Fokker-Planck equation.
    Qfpe,
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Hamiltonian {
    /// `P²/2M`.
    Free,
    /// `P²/2M + M ω² X²/2`.
    Harmonic { omega: f64 },
}

impl Hamiltonian {
    pub fn potential(&self, mass: f64, x: f64) -> f64 {
        match *self {
            Hamiltonian::Free => 0.0,
            Hamiltonian::Harmonic { omega } => 0.5 * mass * omega * omega * x * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub lambda: f64,
    pub d_p: f64,
    pub eta: f64,
    pub d_x: f64,
    pub mass: f64,
    pub hamiltonian: Hamiltonian,
    /// Drop the Hamiltonian entirely (pure dephasing, the infinite-mass limit).
    pub suppress_hamiltonian: bool,
}

impl GeneratorSpec {
    pub fn unitary(mass: f64, hamiltonian: Hamiltonian) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Unitary,
            lambda: 0.0,
            d_p: 0.0,
            eta: 0.0,
            d_x: 0.0,
            mass,
            hamiltonian,
            suppress_hamiltonian: false,
        }
    }

    pub fn jz(lambda: f64, mass: f64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Jz,
            lambda,
            ..Self::unitary(mass, Hamiltonian::Free)
        }
    }

    pub fn qfpe(d_p: f64, eta: f64, d_x: f64, mass: f64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Qfpe,
            d_p,
            eta,
            d_x,
            ..Self::unitary(mass, Hamiltonian::Free)
        }
    }

    pub fn dephasing_only(mut self) -> Self {
        self.suppress_hamiltonian = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(invalid("generator mass must be positive"));
        }
        match self.kind {
            GeneratorKind::Jz if !(self.lambda >= 0.0) => Err(invalid("jz requires Λ ≥ 0")),
            GeneratorKind::Qfpe if !(self.d_p >= 0.0 && self.eta >= 0.0 && self.d_x >= 0.0) => {
                Err(invalid("qfpe requires D_p, η, D_x ≥ 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Precomputed right-hand side of the master equation on a grid.
///
/// Every term is diagonal either in position or in momentum:
/// `[X,[X,ρ]]_ij = (x_i-x_j)² ρ_ij`, `[P,[P,ρ]]` and `[H_kin,ρ]` are diagonal
/// after a two-sided DFT, and `[X,{P,ρ}]_ij = (x_i-x_j) A_ij` with
/// `Ã_kl = (p_k+p_l) ρ̃_kl`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub spec: GeneratorSpec,
    pub grid: Grid,
    spectral: Spectral2d,
    x: Vec<f64>,
    potential: Vec<f64>,
    p: Vec<f64>,
    kinetic: Vec<f64>,
}

impl Generator {
    pub fn new(grid: Grid, spec: GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let x = grid.positions();
        let potential = x.iter().map(|&xi| spec.hamiltonian.potential(spec.mass, xi)).collect();
        let p = grid.momenta_fft_order();
        let kinetic = p.iter().map(|pk| pk * pk / (2.0 * spec.mass)).collect();
        Ok(Generator {
            spec,
            grid,
            spectral: Spectral2d::new(grid.points),
            x,
            potential,
            p,
            kinetic,
        })
    }

    fn unitary(&self) -> bool {
        !self.spec.suppress_hamiltonian
    }

    /// Coefficient of `-[X,[X,ρ]]`.
    fn position_dephasing(&self) -> f64 {
        match self.spec.kind {
            GeneratorKind::Jz => self.spec.lambda,
            GeneratorKind::Qfpe => self.spec.d_p / (self.grid.hbar * self.grid.hbar),
            GeneratorKind::Unitary => 0.0,
        }
    }

    /// Coefficient of `-[P,[P,ρ]]`.
    fn momentum_dephasing(&self) -> f64 {
        match self.spec.kind {
            GeneratorKind::Qfpe => self.spec.d_x / (self.grid.hbar * self.grid.hbar),
            _ => 0.0,
        }
    }

    /// Coefficient of `-i[X,{P,ρ}]`.
    fn friction(&self) -> f64 {
        match self.spec.kind {
            GeneratorKind::Qfpe => self.spec.eta / (2.0 * self.grid.hbar),
            _ => 0.0,
        }
    }

    /// Upper estimate of the generator's spectral radius.
    pub fn spectral_radius(&self) -> f64 {
        let hbar = self.grid.hbar;
        let range = |v: &[f64]| {
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            hi - lo
        };
        let x_span = range(&self.x);
        let p_max = self.grid.p_max();
        let mut r = self.position_dephasing() * x_span * x_span
            + self.momentum_dephasing() * 4.0 * p_max * p_max
            + self.friction() * x_span * 2.0 * p_max;
        if self.unitary() {
            r += (range(&self.kinetic) + range(&self.potential)) / hbar;
        }
        r
    }

    /// Largest energy scale of the Hamiltonian, used by the step heuristic
    /// `dt ≤ 0.1 ħ / max|E|`.
    pub fn max_energy(&self) -> f64 {
        let kin = self.kinetic.iter().cloned().fold(0.0, f64::max);
        let pot = self.potential.iter().cloned().fold(0.0, f64::max);
        kin + pot
    }

    /// `dρ/dt` for a position-representation matrix.
    pub fn rhs(&self, rho: &Array2<C64>) -> Array2<C64> {
        let hbar = self.grid.hbar;
        let unitary = self.unitary();
        let xx = self.position_dephasing();
        let pp = self.momentum_dephasing();
        let fr = self.friction();

        let mut out = Array2::<C64>::zeros(rho.raw_dim());

        if unitary || pp != 0.0 || fr != 0.0 {
            let mut rho_p = rho.clone();
            self.spectral.to_momentum(&mut rho_p);

            if unitary || pp != 0.0 {
                let mut b = Array2::<C64>::zeros(rho.raw_dim());
                Zip::indexed(&mut b).and(&rho_p).for_each(|(k, l), b, &r| {
                    let mut c = C64::new(-pp * (self.p[k] - self.p[l]).powi(2), 0.0);
                    if unitary {
                        c.im -= (self.kinetic[k] - self.kinetic[l]) / hbar;
                    }
                    *b = c * r;
                });
                self.spectral.to_position(&mut b);
                out += &b;
            }

            if fr != 0.0 {
                let mut a = Array2::<C64>::zeros(rho.raw_dim());
                Zip::indexed(&mut a)
                    .and(&rho_p)
                    .for_each(|(k, l), a, &r| *a = r * (self.p[k] + self.p[l]));
                self.spectral.to_position(&mut a);
                Zip::indexed(&mut out).and(&a).for_each(|(i, j), o, &a| {
                    *o += C64::new(0.0, -fr * (self.x[i] - self.x[j])) * a;
                });
            }
        }

        Zip::indexed(&mut out).and(rho).for_each(|(i, j), o, &r| {
            let dx = self.x[i] - self.x[j];
            let mut c = C64::new(-xx * dx * dx, 0.0);
            if unitary {
                c.im -= (self.potential[i] - self.potential[j]) / hbar;
            }
            *o += c * r;
        });
        out
    }
}

/// `dρ/dt` of the master equation described by `spec`.
pub fn generator_apply(rho: &DensityMatrixState, spec: &GeneratorSpec) -> Result<Array2<C64>> {
    rho.require(Representation::Position)?;
    let generator = Generator::new(rho.grid, *spec)?;
    Ok(generator.rhs(&rho.values))
}
