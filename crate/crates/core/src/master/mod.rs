//! Grid discretization and time propagation of the positional-decoherence
//! master equation and the quantum Fokker-Planck equation.

mod diagnostics;
mod generator;
mod grid;
mod operators;
mod propagate;
mod state;

pub use diagnostics::{coherence_length, moment_ode_oracle, moments, Moments};
pub use generator::{generator_apply, Generator, GeneratorKind, GeneratorSpec, Hamiltonian};
pub use grid::Grid;
pub use operators::{build_operators, Operators};
pub use propagate::{max_stable_dt, propagate, propagate_with, recommended_dt};
pub use state::{DensityMatrixState, Representation};
