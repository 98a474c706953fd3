//! Shared FFT plans and N-dimensional transforms on row-major cubes.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(m: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut plans = PLANS.lock().unwrap();
    plans
        .entry((m, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(m)
            } else {
                planner.plan_fft_forward(m)
            }
        })
        .clone()
}

/// In-place N-dimensional transform of an m^n row-major cube, one 1-D pass
/// per axis. The inverse includes the 1/m^n normalization.
pub fn transform_nd(values: &mut [Complex64], m: usize, n: u32, inverse: bool) {
    debug_assert_eq!(values.len(), m.pow(n));
    let fft = plan(m, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let total = values.len();
    for axis in 0..n {
        let stride = m.pow(n - 1 - axis);
        let block = stride * m;
        for i in 0..total / m {
            let base = (i / stride) * block + (i % stride);
            if stride == 1 {
                fft.process(&mut values[base..base + m]);
            } else {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = values[base + j * stride];
                }
                fft.process(&mut line);
                for (j, slot) in line.iter().enumerate() {
                    values[base + j * stride] = *slot;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in values.iter_mut() {
            *v *= scale;
        }
    }
}

/// Wavenumber of mode index j on an m-point axis of length l, in the standard
/// periodic layout (0, 1, …, m/2, −m/2+1, …, −1) · 2π/l.
#[inline]
pub fn wavenumber(j: usize, m: usize, l: f64) -> f64 {
    let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
    2.0 * std::f64::consts::PI / l * k
}

/// Wavenumber used for first derivatives: the Nyquist mode is mapped to zero
/// so that i·k stays conjugate-symmetric on real input.
#[inline]
pub fn wavenumber_deriv(j: usize, m: usize, l: f64) -> f64 {
    if m % 2 == 0 && j == m / 2 {
        0.0
    } else {
        wavenumber(j, m, l)
    }
}

/// Decompose a flat row-major index into per-axis mode indices.
#[inline]
pub fn unravel(idx: usize, m: usize, n: u32, out: &mut [usize; 3]) {
    let mut rem = idx;
    for axis in (0..n as usize).rev() {
        out[axis] = rem % m;
        rem /= m;
    }
}
