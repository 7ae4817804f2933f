//! FFT plumbing shared by the density-matrix grid and the molecule packets.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::{Fft, FftPlanner};

use crate::C64;

/// Row/column transforms of an `n × n` matrix between the position basis and
/// the raw (FFT-ordered, phase-free) momentum basis.
#[derive(Clone)]
pub(crate) struct Spectral2d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2d").field("n", &self.n).finish()
    }
}

impl Spectral2d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral2d {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// `ρ ← U ρ U†` with `U` the unitary DFT.
    pub fn to_momentum(&self, m: &mut Array2<C64>) {
        self.apply(m, true);
    }

    /// `ρ ← U† ρ U`.
    pub fn to_position(&self, m: &mut Array2<C64>) {
        self.apply(m, false);
    }

    /// `m ← U m` (`forward`) or `m ← U† m`, acting on columns only.
    pub fn columns(&self, m: &mut Array2<C64>, forward: bool) {
        let n = self.n;
        assert_eq!(m.dim(), (n, n));
        if !m.is_standard_layout() {
            *m = m.as_standard_layout().to_owned();
        }
        let plan = if forward { &self.forward } else { &self.inverse };
        let data = m.as_slice_mut().expect("standard layout");
        transpose_in_place(data, n);
        plan.process(data);
        transpose_in_place(data, n);
        let scale = 1.0 / (n as f64).sqrt();
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn apply(&self, m: &mut Array2<C64>, to_momentum: bool) {
        let n = self.n;
        assert_eq!(m.dim(), (n, n));
        let (col_plan, row_plan) = if to_momentum {
            (&self.forward, &self.inverse)
        } else {
            (&self.inverse, &self.forward)
        };
        if !m.is_standard_layout() {
            *m = m.as_standard_layout().to_owned();
        }
        let data = m.as_slice_mut().expect("standard layout");
        transpose_in_place(data, n);
        col_plan.process(data);
        transpose_in_place(data, n);
        row_plan.process(data);
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

fn transpose_in_place(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed frequency index of FFT bin `b` for length `n`.
#[inline]
pub(crate) fn signed_bin(b: usize, n: usize) -> i64 {
    if b < n.div_ceil(2) {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// Trigonometric interpolation of uniformly spaced samples, returning
/// `f(x_j + fraction · spacing)` for every sample point `x_j`.
pub(crate) fn fractional_shift(samples: &[C64], fraction: f64) -> Vec<C64> {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (b, z) in buf.iter_mut().enumerate() {
        if n % 2 == 0 && b == n / 2 {
            // Nyquist bin: symmetric treatment keeps real data real.
            *z *= (PI * fraction).cos();
        } else {
            let freq = signed_bin(b, n) as f64;
            *z *= C64::from_polar(1.0, 2.0 * PI * freq * fraction / n as f64);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}
