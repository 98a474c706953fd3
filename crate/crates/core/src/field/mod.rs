//! Periodic-box discretization with spectral derivatives.
//!
//! Functions on ℝ^N are represented by samples on a uniform grid over
//! [−L/2, L/2)^N with periodic wrap-around. Quadrature is the equal-weight
//! rule (trapezoidal on a periodic box, spectrally accurate for decaying
//! smooth fields); derivatives are spectral multipliers. Every state carries
//! a boundary-mass diagnostic so box-truncation artifacts are visible.

mod fft;
pub mod energy;
pub mod io;

pub use energy::Coefficient;

use num_complex::Complex64;
use rand::Rng;
use std::sync::OnceLock;
use thiserror::Error;

/// Accepted states must keep less than this mass fraction in the outer shell.
pub const BOUNDARY_MASS_MAX: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    BadDimension(u32),
    #[error("points per axis must be a power of two >= 16, got {0}")]
    BadResolution(usize),
    #[error("box edge must be positive, got {0}")]
    BadEdge(f64),
    #[error("value buffer has length {got}, grid needs {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("grids do not match")]
    GridMismatch,
    #[error("operation undefined on the zero field")]
    ZeroField,
    #[error("dilation factor must be positive, got {0}")]
    BadDilation(f64),
    #[error("profile leaks {fraction:.3e} of its mass into the boundary shell (limit {limit:.3e})")]
    SupportOverflow { fraction: f64, limit: f64 },
    #[error("norm exponent must satisfy t >= 1, got {0}")]
    BadNormExponent(f64),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field file: {0}")]
    BadFormat(String),
}

/// Uniform periodic grid over [−L/2, L/2)^N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: u32,
    m: usize,
    l: f64,
}

impl Grid {
    pub fn new(n: u32, m: usize, l: f64) -> Result<Self, FieldError> {
        if !(1..=3).contains(&n) {
            return Err(FieldError::BadDimension(n));
        }
        if m < 16 || !m.is_power_of_two() {
            return Err(FieldError::BadResolution(m));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(FieldError::BadEdge(l));
        }
        Ok(Self { n, m, l })
    }

    pub fn dim(&self) -> u32 {
        self.n
    }
    pub fn points_per_axis(&self) -> usize {
        self.m
    }
    pub fn edge(&self) -> f64 {
        self.l
    }
    pub fn spacing(&self) -> f64 {
        self.l / self.m as f64
    }
    pub fn total_points(&self) -> usize {
        self.m.pow(self.n)
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }
    /// Largest |k|² representable on the grid.
    pub fn k_max_sq(&self) -> f64 {
        let k = std::f64::consts::PI / self.spacing();
        self.n as f64 * k * k
    }

    /// Physical coordinates of a flat index (unused axes are zero).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mut modes = [0usize; 3];
        fft::unravel(idx, self.m, self.n, &mut modes);
        let h = self.spacing();
        let mut out = [0.0; 3];
        for axis in 0..self.n as usize {
            out[axis] = -0.5 * self.l + modes[axis] as f64 * h;
        }
        out
    }

    /// |k|² of a flat spectral index.
    fn k_sq(&self, idx: usize) -> f64 {
        let mut modes = [0usize; 3];
        fft::unravel(idx, self.m, self.n, &mut modes);
        let mut total = 0.0;
        for axis in 0..self.n as usize {
            let k = fft::wavenumber(modes[axis], self.m, self.l);
            total += k * k;
        }
        total
    }
}

/// Compensated accumulation; quadrature sums must not lose digits to plain
/// left-to-right rounding.
#[derive(Default, Clone, Copy)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// Grid function with cached diagnostics.
///
/// Values are complex samples in row-major order; fields produced by the
/// minimization phase keep imaginary parts exactly zero. All public
/// operations treat a field as immutable and allocate their results, so the
/// caches never go stale.
#[derive(Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
    real: bool,
    mass: OnceLock<f64>,
    grad: OnceLock<f64>,
    boundary: OnceLock<f64>,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.clone(),
            real: self.real,
            mass: self.mass.clone(),
            grad: self.grad.clone(),
            boundary: self.boundary.clone(),
        }
    }
}

impl Field {
    fn wrap(grid: Grid, values: Vec<Complex64>) -> Self {
        let real = values.iter().all(|v| v.im == 0.0);
        Self { grid, values, real, mass: OnceLock::new(), grad: OnceLock::new(), boundary: OnceLock::new() }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self, FieldError> {
        if values.len() != grid.total_points() {
            return Err(FieldError::LengthMismatch { got: values.len(), want: grid.total_points() });
        }
        Ok(Self::wrap(grid, values))
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::wrap(grid, vec![Complex64::new(0.0, 0.0); grid.total_points()])
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.n as usize;
        let values = (0..grid.total_points())
            .map(|i| Complex64::new(f(&grid.coords(i)[..n]), 0.0))
            .collect();
        Self::wrap(grid, values)
    }

    pub fn from_complex_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let n = grid.n as usize;
        let values = (0..grid.total_points()).map(|i| f(&grid.coords(i)[..n])).collect();
        Self::wrap(grid, values)
    }

    /// Unnormalized Gaussian bump exp(−|x−c|²/(2w²)).
    pub fn gaussian(grid: Grid, center: &[f64], width: f64) -> Self {
        Self::from_real_fn(grid, |x| {
            let r2: f64 = x.iter().zip(center).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
            (-r2 / (2.0 * width * width)).exp()
        })
    }

    /// Random band-limited periodic field: unit-scale random spectral
    /// amplitudes on modes |k| ≤ k_cut, zero elsewhere.
    pub fn random_bandlimited(grid: Grid, k_cut: f64, real: bool, rng: &mut impl Rng) -> Self {
        let total = grid.total_points();
        let mut spec = vec![Complex64::new(0.0, 0.0); total];
        for (idx, slot) in spec.iter_mut().enumerate() {
            if grid.k_sq(idx) <= k_cut * k_cut {
                let re = rng.random::<f64>() - 0.5;
                let im = rng.random::<f64>() - 0.5;
                *slot = Complex64::new(re, im);
            }
        }
        fft::transform_nd(&mut spec, grid.m, grid.n, true);
        if real {
            for v in spec.iter_mut() {
                *v = Complex64::new(v.re, 0.0);
            }
        }
        Self::wrap(grid, spec)
    }

    /// Random smooth decaying field: a band-limited sample under a Gaussian
    /// envelope of the given width around `center`, so it behaves like an
    /// honest whole-space state. Keep the window below about a tenth of the
    /// box edge or the envelope's boundary kink leaves a visible spectral
    /// floor.
    pub fn random_localized(
        grid: Grid,
        k_cut: f64,
        window: f64,
        center: &[f64],
        real: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let base = Self::random_bandlimited(grid, k_cut, real, rng);
        let n = grid.n as usize;
        let mut values = base.values;
        for (idx, v) in values.iter_mut().enumerate() {
            let x = grid.coords(idx);
            let r2: f64 = x[..n].iter().zip(center).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
            *v *= (-r2 / (2.0 * window * window)).exp();
        }
        Self::wrap(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// ‖u‖₂² by equal-weight quadrature.
    pub fn mass(&self) -> f64 {
        *self.mass.get_or_init(|| {
            let mut acc = Kahan::default();
            for v in &self.values {
                acc.add(v.norm_sqr());
            }
            acc.total() * self.grid.cell_volume()
        })
    }

    /// ‖∇u‖₂ via the spectral multiplier.
    pub fn grad_norm(&self) -> f64 {
        *self.grad.get_or_init(|| {
            let mut spec = self.values.clone();
            fft::transform_nd(&mut spec, self.grid.m, self.grid.n, false);
            let mut acc = Kahan::default();
            for (idx, v) in spec.iter().enumerate() {
                acc.add(self.grid.k_sq(idx) * v.norm_sqr());
            }
            let scale = self.grid.cell_volume() / self.grid.total_points() as f64;
            (acc.total() * scale).max(0.0).sqrt()
        })
    }

    /// Mass fraction in the outer shell (within 10% of the half-edge of any
    /// face); the box is only a faithful model of ℝ^N while this is tiny.
    pub fn boundary_mass_fraction(&self) -> f64 {
        *self.boundary.get_or_init(|| {
            let cut = 0.45 * self.grid.l;
            let n = self.grid.n as usize;
            let mut shell = Kahan::default();
            let mut total = Kahan::default();
            for (idx, v) in self.values.iter().enumerate() {
                let x = self.grid.coords(idx);
                let m = v.norm_sqr();
                total.add(m);
                if x[..n].iter().any(|xi| xi.abs() >= cut) {
                    shell.add(m);
                }
            }
            if total.total() == 0.0 {
                0.0
            } else {
                shell.total() / total.total()
            }
        })
    }

    /// ‖u‖_t for t ≥ 1.
    pub fn lp_norm(&self, t: f64) -> Result<f64, FieldError> {
        if !(t >= 1.0) {
            return Err(FieldError::BadNormExponent(t));
        }
        let mut acc = Kahan::default();
        for v in &self.values {
            acc.add(v.norm().powf(t));
        }
        Ok((acc.total() * self.grid.cell_volume()).powf(1.0 / t))
    }

    /// ‖u‖²_{H¹} = ‖u‖₂² + ‖∇u‖₂².
    pub fn h1_norm_sq(&self) -> f64 {
        let g = self.grad_norm();
        self.mass() + g * g
    }

    /// ⟨u, v⟩ = ∫ u·v̄ by quadrature.
    pub fn l2_inner(&self, other: &Field) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let mut re = Kahan::default();
        let mut im = Kahan::default();
        for (a, b) in self.values.iter().zip(&other.values) {
            let p = a * b.conj();
            re.add(p.re);
            im.add(p.im);
        }
        Complex64::new(re.total(), im.total()) * self.grid.cell_volume()
    }

    /// ⟨u, v⟩ + ⟨∇u, ∇v⟩, evaluated spectrally.
    pub fn h1_inner(&self, other: &Field) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let mut a = self.values.clone();
        let mut b = other.values.clone();
        fft::transform_nd(&mut a, self.grid.m, self.grid.n, false);
        fft::transform_nd(&mut b, self.grid.m, self.grid.n, false);
        let mut re = Kahan::default();
        let mut im = Kahan::default();
        for (idx, (x, y)) in a.iter().zip(&b).enumerate() {
            let p = (1.0 + self.grid.k_sq(idx)) * (x * y.conj());
            re.add(p.re);
            im.add(p.im);
        }
        let scale = self.grid.cell_volume() / self.grid.total_points() as f64;
        Complex64::new(re.total(), im.total()) * scale
    }

    /// Plain |u|²-barycenter in box coordinates (meaningful for states
    /// supported away from the boundary).
    pub fn center_of_mass(&self) -> Result<[f64; 3], FieldError> {
        let mass = self.mass();
        if mass == 0.0 {
            return Err(FieldError::ZeroField);
        }
        let n = self.grid.n as usize;
        let mut acc = [Kahan::default(); 3];
        for (idx, v) in self.values.iter().enumerate() {
            let x = self.grid.coords(idx);
            let w = v.norm_sqr();
            for axis in 0..n {
                acc[axis].add(w * x[axis]);
            }
        }
        let scale = self.grid.cell_volume() / mass;
        Ok([acc[0].total() * scale, acc[1].total() * scale, acc[2].total() * scale])
    }

    /// c₁·u + c₂·v.
    pub fn combined(c1: Complex64, u: &Field, c2: Complex64, v: &Field) -> Result<Field, FieldError> {
        if u.grid != v.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = u
            .values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| c1 * a + c2 * b)
            .collect();
        Ok(Field::wrap(u.grid, values))
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field::wrap(self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub fn phase_rotated(&self, theta: f64) -> Field {
        let z = Complex64::cis(theta);
        Field::wrap(self.grid, self.values.iter().map(|v| z * v).collect())
    }

    /// Rescale so that ‖result‖₂² = a².
    pub fn normalize_to_mass(&self, a: f64) -> Result<Field, FieldError> {
        let mass = self.mass();
        if mass == 0.0 {
            return Err(FieldError::ZeroField);
        }
        let out = self.scaled(a / mass.sqrt());
        Ok(out)
    }

    /// −Δu via the spectral multiplier.
    pub fn neg_laplacian(&self) -> Field {
        let mut spec = self.values.clone();
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, false);
        for (idx, v) in spec.iter_mut().enumerate() {
            *v *= self.grid.k_sq(idx);
        }
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, true);
        if self.real {
            for v in spec.iter_mut() {
                *v = Complex64::new(v.re, 0.0);
            }
        }
        Field::wrap(self.grid, spec)
    }

    /// ∂u/∂x_axis via i·k multiplication (Nyquist mode dropped).
    pub fn partial(&self, axis: u32) -> Field {
        assert!(axis < self.grid.n, "axis {axis} out of range");
        let mut spec = self.values.clone();
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, false);
        let mut modes = [0usize; 3];
        for (idx, v) in spec.iter_mut().enumerate() {
            fft::unravel(idx, self.grid.m, self.grid.n, &mut modes);
            let k = fft::wavenumber_deriv(modes[axis as usize], self.grid.m, self.grid.l);
            *v *= Complex64::new(0.0, k);
        }
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, true);
        if self.real {
            for v in spec.iter_mut() {
                *v = Complex64::new(v.re, 0.0);
            }
        }
        Field::wrap(self.grid, spec)
    }

    /// Translate by an arbitrary shift. Whole-cell shifts are exact index
    /// rotations; anything else is a spectral phase shift (exact on
    /// band-limited data).
    pub fn translate(&self, shift: &[f64]) -> Field {
        let n = self.grid.n as usize;
        debug_assert_eq!(shift.len(), n);
        let h = self.grid.spacing();
        let cells: Vec<i64> = shift.iter().map(|s| (s / h).round() as i64).collect();
        let exact = shift
            .iter()
            .zip(&cells)
            .all(|(s, &c)| (s - c as f64 * h).abs() <= 1e-12 * h.max(s.abs()));
        if exact {
            return self.translate_cells(&cells);
        }
        let mut spec = self.values.clone();
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, false);
        let mut modes = [0usize; 3];
        for (idx, v) in spec.iter_mut().enumerate() {
            fft::unravel(idx, self.grid.m, self.grid.n, &mut modes);
            let mut phase = 0.0;
            for axis in 0..n {
                phase -= fft::wavenumber_deriv(modes[axis], self.grid.m, self.grid.l) * shift[axis];
            }
            *v *= Complex64::cis(phase);
        }
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, true);
        if self.real {
            for v in spec.iter_mut() {
                *v = Complex64::new(v.re, 0.0);
            }
        }
        Field::wrap(self.grid, spec)
    }

    /// Exact periodic rotation by whole cells.
    pub fn translate_cells(&self, cells: &[i64]) -> Field {
        let n = self.grid.n as usize;
        let m = self.grid.m as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        let mut modes = [0usize; 3];
        for (idx, v) in self.values.iter().enumerate() {
            fft::unravel(idx, self.grid.m, self.grid.n, &mut modes);
            let mut target = 0usize;
            for axis in 0..n {
                let shifted = (modes[axis] as i64 + cells[axis]).rem_euclid(m) as usize;
                target = target * self.grid.m + shifted;
            }
            out[target] = *v;
        }
        Field::wrap(self.grid, out)
    }

    /// Mass-preserving dilation u ↦ t^{N/2}·u(t·x), by per-axis evaluation of
    /// the trigonometric interpolant at the scaled grid points.
    pub fn dilate(&self, t: f64) -> Result<Field, FieldError> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(FieldError::BadDilation(t));
        }
        if t == 1.0 {
            return Ok(self.clone());
        }
        let m = self.grid.m;
        let n = self.grid.n;
        let mut spec = self.values.clone();
        fft::transform_nd(&mut spec, m, n, false);
        // Per-axis evaluation of the interpolant at the scaled points. The
        // spectral coefficients are anchored at index 0 (x = −L/2), so the
        // evaluation point enters as t·x + L/2.
        let mut matrix = vec![Complex64::new(0.0, 0.0); m * m];
        let h = self.grid.spacing();
        for i in 0..m {
            let x = -0.5 * self.grid.l + i as f64 * h;
            for j in 0..m {
                let k = fft::wavenumber_deriv(j, m, self.grid.l);
                matrix[i * m + j] = Complex64::cis(k * (t * x + 0.5 * self.grid.l)) / m as f64;
            }
        }
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let total = spec.len();
        for axis in 0..n {
            let stride = m.pow(n - 1 - axis);
            let block = stride * m;
            for i in 0..total / m {
                let base = (i / stride) * block + (i % stride);
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = spec[base + j * stride];
                }
                for row in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, v) in line.iter().enumerate() {
                        acc += matrix[row * m + j] * v;
                    }
                    spec[base + row * stride] = acc;
                }
            }
        }
        let amp = t.powf(n as f64 / 2.0);
        for v in spec.iter_mut() {
            *v *= amp;
            if self.real {
                *v = Complex64::new(v.re, 0.0);
            }
        }
        let out = Field::wrap(self.grid, spec);
        let fraction = out.boundary_mass_fraction();
        if fraction > BOUNDARY_MASS_MAX {
            return Err(FieldError::SupportOverflow { fraction, limit: BOUNDARY_MASS_MAX });
        }
        Ok(out)
    }

    /// Raw spectrum (forward transform of the samples).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut spec = self.values.clone();
        fft::transform_nd(&mut spec, self.grid.m, self.grid.n, false);
        spec
    }
}

pub(crate) use fft::{transform_nd, unravel, wavenumber};

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(1, 256, 40.0).unwrap()
    }

    fn grid2() -> Grid {
        Grid::new(2, 32, 20.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0, 64, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0).is_err());
        assert!(Grid::new(1, 48, 1.0).is_err());
        assert!(Grid::new(1, 8, 1.0).is_err());
        assert!(Grid::new(1, 64, -1.0).is_err());
        assert!(Grid::new(3, 64, 30.0).is_ok());
    }

    #[test]
    fn constant_field_mass_is_exact() {
        let g = grid2();
        let c = 0.7;
        let u = Field::from_real_fn(g, |_| c);
        let expected = c * c * g.edge().powi(g.dim() as i32);
        assert!((u.mass() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn gaussian_mass_matches_closed_form() {
        // ∫ exp(−x²/w²) = w·sqrt(pi) per axis; the box truncation error is
        // far below 1e−10 for w = L/16.
        let g = grid();
        let w = g.edge() / 16.0;
        let u = Field::gaussian(g, &[0.0], w);
        let expected = w * std::f64::consts::PI.sqrt();
        assert!((u.mass() - expected).abs() <= 1e-10 * expected);

        let g2 = grid2();
        let w2 = g2.edge() / 16.0;
        let u2 = Field::gaussian(g2, &[0.0, 0.0], w2);
        let expected2 = (w2 * std::f64::consts::PI.sqrt()).powi(2);
        assert!((u2.mass() - expected2).abs() <= 1e-10 * expected2);
    }

    #[test]
    fn spectral_gradient_against_stencil() {
        // Second-order central differences must approach the spectral value
        // at O(h²): quartering the spacing shrinks the gap ~16x.
        let stencil_norm = |u: &Field| {
            let g = u.grid();
            let m = g.points_per_axis();
            let h = g.spacing();
            let vals = u.values();
            let mut acc = 0.0;
            for i in 0..m {
                let prev = vals[(i + m - 1) % m].re;
                let next = vals[(i + 1) % m].re;
                let d = (next - prev) / (2.0 * h);
                acc += d * d;
            }
            (acc * h).sqrt()
        };
        let mut gaps = Vec::new();
        for m in [64usize, 256] {
            let g = Grid::new(1, m, 40.0).unwrap();
            let u = Field::from_real_fn(g, |x| (-x[0] * x[0] / 8.0).exp() * (1.5 * x[0]).cos());
            gaps.push((stencil_norm(&u) - u.grad_norm()).abs());
        }
        assert!(gaps[1] <= gaps[0] / 12.0, "gaps {gaps:?}");
    }

    #[test]
    fn laplacian_is_symmetric_against_gradient_pairing() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u = Field::random_bandlimited(g, 2.0, true, &mut rng);
            let v = Field::random_bandlimited(g, 2.0, true, &mut rng);
            let lap = u.neg_laplacian();
            let lhs = lap.l2_inner(&v).re;
            let rhs = u.partial(0).l2_inner(&v.partial(0)).re;
            let scale = (lap.mass().sqrt() * v.mass().sqrt()).max(1e-30);
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "lhs {lhs}, rhs {rhs}");
        }
    }

    #[test]
    fn normalize_semantics() {
        let g = grid();
        let u = Field::gaussian(g, &[1.0], 2.0);
        let a = 0.5;
        let n1 = u.normalize_to_mass(a).unwrap();
        assert!((n1.mass() - a * a).abs() <= 1e-14 * a * a);
        // Idempotence and homogeneity.
        let n2 = n1.normalize_to_mass(a).unwrap();
        let n3 = u.scaled(3.25).normalize_to_mass(a).unwrap();
        for ((x, y), z) in n1.values().iter().zip(n2.values()).zip(n3.values()) {
            assert!((x - y).norm() <= 1e-14);
            assert!((x - z).norm() <= 1e-14);
        }
        assert!(matches!(Field::zeros(g).normalize_to_mass(a), Err(FieldError::ZeroField)));
    }

    #[test]
    fn dilation_identity_and_mass() {
        let g = grid();
        let u = Field::gaussian(g, &[0.0], 2.0).normalize_to_mass(1.0).unwrap();
        let same = u.dilate(1.0).unwrap();
        for (a, b) in u.values().iter().zip(same.values()) {
            assert!((a - b).norm() <= 1e-14);
        }
        let half = u.dilate(0.5).unwrap();
        assert!((half.mass() - u.mass()).abs() <= 1e-10 * u.mass());
        // Kinetic term scales by t².
        let ratio = half.grad_norm() / u.grad_norm();
        assert!((ratio - 0.5).abs() <= 1e-8, "ratio {ratio}");
    }

    #[test]
    fn dilation_support_overflow() {
        let g = grid();
        let u = Field::gaussian(g, &[0.0], 4.0).normalize_to_mass(1.0).unwrap();
        // Spreading by 32x pushes the tails across the boundary shell.
        let r = u.dilate(1.0 / 32.0);
        assert!(matches!(r, Err(FieldError::SupportOverflow { .. })));
    }

    #[test]
    fn translation_exact_on_cells_and_spectral_otherwise() {
        let g = grid();
        let u = Field::gaussian(g, &[0.0], 2.0);
        let h = g.spacing();
        let by_cells = u.translate(&[3.0 * h]);
        // Exact rotation: values are a permutation.
        let direct = u.translate_cells(&[3]);
        for (a, b) in by_cells.values().iter().zip(direct.values()) {
            assert_eq!(a, b);
        }
        assert!((by_cells.mass() - u.mass()).abs() <= 1e-14);
        // Fractional shift: band-limited data moves exactly.
        let frac = u.translate(&[0.375 * h]);
        let expected = Field::gaussian(g, &[0.375 * h], 2.0);
        for (a, b) in frac.values().iter().zip(expected.values()) {
            assert!((a - b).norm() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn boundary_fraction_flags_edge_profiles() {
        let g = grid();
        let centered = Field::gaussian(g, &[0.0], 1.5);
        assert!(centered.boundary_mass_fraction() < BOUNDARY_MASS_MAX);
        let edged = Field::gaussian(g, &[0.47 * g.edge()], 1.5);
        assert!(edged.boundary_mass_fraction() > 0.1);
    }

    #[test]
    fn center_of_mass_tracks_translation() {
        let g = grid();
        let u = Field::gaussian(g, &[-2.5], 1.5);
        let com = u.center_of_mass().unwrap();
        assert!((com[0] + 2.5).abs() <= 1e-9);
        assert!(Field::zeros(g).center_of_mass().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn lp_norm_homogeneous(c in 0.1f64..10.0, t in 1.0f64..8.0) {
            let g = Grid::new(1, 64, 20.0).unwrap();
            let u = Field::gaussian(g, &[0.0], 2.0);
            let lhs = u.scaled(c).lp_norm(t).unwrap();
            let rhs = c * u.lp_norm(t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }

        #[test]
        fn norms_invariant_under_global_phase(theta in 0.0f64..std::f64::consts::TAU) {
            let g = Grid::new(1, 64, 20.0).unwrap();
            let u = Field::from_complex_fn(g, |x| {
                Complex64::new((-x[0] * x[0] / 4.0).exp(), 0.3 * (-x[0] * x[0] / 6.0).exp())
            });
            let rotated = u.phase_rotated(theta);
            prop_assert!((rotated.mass() - u.mass()).abs() <= 1e-12 * u.mass());
            prop_assert!((rotated.grad_norm() - u.grad_norm()).abs() <= 1e-10 * u.grad_norm());
            prop_assert!((rotated.lp_norm(4.0).unwrap() - u.lp_norm(4.0).unwrap()).abs() <= 1e-12);
        }
    }
}
