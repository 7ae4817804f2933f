use ndarray::Array2;

use super::{Grid, Hamiltonian};
use crate::C64;

/// Dense position, momentum and Hamiltonian matrices in the position basis.
#[derive(Debug, Clone)]
pub struct Operators {
    pub x: Array2<C64>,
    pub p: Array2<C64>,
    pub h: Array2<C64>,
}

/// Builds `X` (diagonal), the spectral `P = U† diag(p) U`, and
/// `H = P²/2M + V(X)`.
pub fn build_operators(grid: &Grid, mass: f64, hamiltonian: Hamiltonian) -> Operators {
    let n = grid.points;
    let xs = grid.positions();
    let ps = grid.momenta();
    let spectral = |f: &dyn Fn(f64) -> f64| {
        Array2::from_shape_fn((n, n), |(a, b)| {
            let dx = xs[a] - xs[b];
            ps.iter()
                .map(|&p| C64::from_polar(f(p), p * dx / grid.hbar))
                .sum::<C64>()
                / n as f64
        })
    };
    let x = Array2::from_diag(&ndarray::Array1::from_iter(xs.iter().map(|&x| C64::new(x, 0.0))));
    let p = spectral(&|p| p);
    let mut h = spectral(&|p| p * p / (2.0 * mass));
    for (i, &xi) in xs.iter().enumerate() {
        h[[i, i]] += hamiltonian.potential(mass, xi);
    }
    // Rounding leaves imaginary dust on real symmetric pieces; make them exactly Hermitian.
    let hermitize = |m: Array2<C64>| {
        let adj = m.t().mapv(|z| z.conj());
        (&m + &adj).mapv(|z| z * 0.5)
    };
    Operators {
        x,
        p: hermitize(p),
        h: hermitize(h),
    }
}
