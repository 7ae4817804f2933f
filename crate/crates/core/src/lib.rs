//! Numerical laboratory for quantum Brownian motion of a heavy particle in a
//! dilute gas.
//!
//! The crate is split along the physics:
//!
//! * [`physical`] holds parameters and the closed-form coefficient relations
//!   (localization rate, fluctuation-dissipation, complete-positivity bound).
//! * [`collision`] implements exact elastic collision kinematics and the
//!   single-collision map acting on the dust density matrix.
//! * [`msqr`] builds the thermal gas state and its square-root (pure state)
//!   substitute.
//! * [`master`] discretizes position and momentum on a periodic grid and
//!   propagates the positional-decoherence and quantum Fokker-Planck equations.
//! * [`classical`] provides Langevin and collision-gas Monte Carlo references.
//! * [`coefficients`] extracts and compares candidate position-diffusion
//!   coefficients.

pub mod classical;
pub mod coefficients;
pub mod collision;
mod error;
mod fft;
pub mod lattice;
pub mod master;
pub mod msqr;
pub mod physical;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;
