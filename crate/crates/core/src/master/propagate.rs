use ndarray::{Array2, Zip};

use super::{DensityMatrixState, Generator, GeneratorSpec, Representation};
use crate::error::{invalid, Error, Result};
use crate::C64;

/// RK4 stability bound on the imaginary axis is ~2.83; keep a margin.
const STABILITY_MARGIN: f64 = 2.5;

/// Largest step the integrator accepts for this generator.
pub fn max_stable_dt(generator: &Generator) -> f64 {
    let r = generator.spectral_radius();
    if r > 0.0 {
        STABILITY_MARGIN / r
    } else {
        f64::INFINITY
    }
}

/// Step suggested by `dt ≤ 0.1 ħ / max|E|`, capped by the stability bound.
pub fn recommended_dt(generator: &Generator) -> f64 {
    let e = generator.max_energy();
    let heuristic = if e > 0.0 {
        0.1 * generator.grid.hbar / e
    } else {
        f64::INFINITY
    };
    heuristic.min(max_stable_dt(generator))
}

pub fn propagate(
    rho0: &DensityMatrixState,
    spec: &GeneratorSpec,
    dt: f64,
    t_end: f64,
) -> Result<DensityMatrixState> {
    let generator = Generator::new(rho0.grid, *spec)?;
    propagate_with(rho0, &generator, dt, t_end, usize::MAX, |_, _, _| Ok(()))
}

/// Classical RK4 integration from `t = 0` to `t_end`.
///
/// `observer(step, t, state)` runs on the initial state, every `every` steps,
/// and on the final state. The last step is shortened to land on `t_end`.
pub fn propagate_with<F>(
    rho0: &DensityMatrixState,
    generator: &Generator,
    dt: f64,
    t_end: f64,
    every: usize,
    mut observer: F,
) -> Result<DensityMatrixState>
where
    F: FnMut(usize, f64, &DensityMatrixState) -> Result<()>,
{
    rho0.require(Representation::Position)?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid("dt must be positive and t_end non-negative"));
    }
    let limit = max_stable_dt(generator);
    if dt > limit {
        return Err(invalid(format!(
            "dt = {dt:.3e} exceeds the RK4 stability limit {limit:.3e} for this generator"
        )));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let tr0 = rho0.trace();
    let mut state = rho0.clone();
    observer(0, 0.0, &state)?;
    let mut t = 0.0;
    for step in 1..=steps {
        let h = if step == steps { t_end - t } else { dt };
        state.values = rk4_step(generator, &state.values, h);
        state.symmetrize();
        t = if step == steps { t_end } else { t + h };

        let tr = state.trace();
        let biggest = state.values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt();
        if !tr.re.is_finite() || !biggest.is_finite() || biggest > 2.0 || (tr - tr0).norm() > 1e-6 {
            return Err(Error::Instability {
                step,
                time: t,
                detail: format!("trace {tr:.6e}, max |ρ_ij| {biggest:.3e}"),
            });
        }
        if step % every == 0 || step == steps {
            observer(step, t, &state)?;
        }
    }
    Ok(state)
}

fn rk4_step(generator: &Generator, rho: &Array2<C64>, h: f64) -> Array2<C64> {
    let mut next = rho.clone();
    let mut stage = Array2::<C64>::zeros(rho.raw_dim());
    let mut k = generator.rhs(rho);
    for (weight, advance) in [(1.0, 0.5), (2.0, 0.5), (2.0, 1.0)] {
        Zip::from(&mut next).and(&k).for_each(|n, &d| *n += d * (weight * h / 6.0));
        Zip::from(&mut stage).and(rho).and(&k).for_each(|s, &r, &d| *s = r + d * (advance * h));
        k = generator.rhs(&stage);
    }
    Zip::from(&mut next).and(&k).for_each(|n, &d| *n += d * (h / 6.0));
    next
}
