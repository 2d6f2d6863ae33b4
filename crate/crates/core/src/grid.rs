//! Periodic-box surrogate of ℝᵈ.
//!
//! A [`Grid`] is the cube `[-L/2, L/2)^d` sampled with `N` points per axis.
//! Physical samples live in a [`Field`] (row-major), Fourier samples in a
//! [`SpectralField`] stored in FFT order (`k = 0, 1, …, N/2-1, -N/2, …, -1`
//! on every axis). The transform pair is the quadrature of
//!
//! ```text
//! û(ξ) = (2π)^{-d/2} ∫ e^{-ix·ξ} u(x) dx,      u(x) = (2π)^{-d/2} ∫ e^{ix·ξ} û(ξ) dξ
//! ```
//!
//! with weights `dx^d` and `dξ^d`, so that Parseval reads
//! `dx^d Σ|u|² = dξ^d Σ|û|²` exactly (up to roundoff).

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::sum::pairwise_map_sum;
use crate::{Error, Real, Result};

pub const MAX_DIM: usize = 3;

type Plan<T> = Arc<dyn Fft<T>>;

struct Shared<T: Real> {
    forward: Plan<T>,
    inverse: Plan<T>,
    // 3N/2 transforms for dealiased products, built on first use.
    padded: OnceLock<(Plan<T>, Plan<T>)>,
    xi_sq: OnceLock<Vec<T>>,
}

/// Cubic periodic grid: `dim` axes, `n` points per axis, box length `length`.
#[derive(Clone)]
pub struct Grid<T: Real> {
    dim: usize,
    n: usize,
    length: T,
    shared: Arc<Shared<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, n: usize, length: T) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..={MAX_DIM}, got {dim}"
            )));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > T::zero()) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let shared = Shared {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            padded: OnceLock::new(),
            xi_sq: OnceLock::new(),
        };
        Ok(Self {
            dim,
            n,
            length,
            shared: Arc::new(shared),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn dx(&self) -> T {
        self.length / T::from_usize_lossy(self.n)
    }

    pub fn dxi(&self) -> T {
        T::TAU() / self.length
    }

    /// Total number of samples, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical cell volume `dx^d`.
    pub fn cell_volume(&self) -> T {
        self.dx().powi(self.dim as i32)
    }

    /// Spectral cell volume `dξ^d`.
    pub fn spectral_cell_volume(&self) -> T {
        self.dxi().powi(self.dim as i32)
    }

    /// Same `dim` and `n` with box length `length / h` (the co-scaled grid
    /// on which `f(h·)` has the same samples as `f` on `self`).
    pub fn coscaled(&self, h: T) -> Result<Self> {
        if !(h.is_finite() && h > T::zero()) {
            return Err(Error::Domain(format!("scale h must be positive, got {h}")));
        }
        Grid::new(self.dim, self.n, self.length / h)
    }

    pub fn ensure_same(&self, other: &Grid<T>) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn axis_indices(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// `x_j = -L/2 + j·dx`.
    pub fn coordinate(&self, j: usize) -> T {
        -self.length / T::lit(2.0) + T::from_usize_lossy(j) * self.dx()
    }

    /// Signed wavenumber of FFT-order index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn position(&self, flat: usize) -> [T; MAX_DIM] {
        let idx = self.axis_indices(flat);
        let mut x = [T::zero(); MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    pub fn wavevector(&self, flat: usize) -> [T; MAX_DIM] {
        let idx = self.axis_indices(flat);
        let mut xi = [T::zero(); MAX_DIM];
        for axis in 0..self.dim {
            xi[axis] = T::lit(self.wavenumber(idx[axis]) as f64) * self.dxi();
        }
        xi
    }

    /// `|ξ_k|²` for every spectral index, cached.
    pub fn xi_sq(&self) -> &[T] {
        self.shared.xi_sq.get_or_init(|| {
            (0..self.len())
                .map(|flat| {
                    let xi = self.wavevector(flat);
                    xi[..self.dim].iter().fold(T::zero(), |acc, &c| acc + c * c)
                })
                .collect()
        })
    }

    /// `|ξ_k|` for every spectral index.
    pub fn xi_abs(&self) -> Vec<T> {
        self.xi_sq().iter().map(|s| s.sqrt()).collect()
    }

    /// Flat index of the mode `-k` (the Nyquist index maps to itself).
    pub fn negated_index(&self, flat: usize) -> usize {
        let idx = self.axis_indices(flat);
        (0..self.dim).fold(0, |acc, axis| acc * self.n + (self.n - idx[axis]) % self.n)
    }

    fn parity(&self, flat: usize) -> bool {
        let idx = self.axis_indices(flat);
        idx[..self.dim].iter().sum::<usize>() % 2 == 1
    }

    /// Unnormalized in-place DFT over every axis.
    pub(crate) fn dft(&self, data: &mut [Complex<T>], direction: FftDirection) {
        let plan = match direction {
            FftDirection::Forward => &self.shared.forward,
            FftDirection::Inverse => &self.shared.inverse,
        };
        transform_axes(data, self.n, self.dim, plan.as_ref());
    }

    fn padded_size(&self) -> usize {
        3 * self.n / 2
    }

    fn padded_plans(&self) -> &(Plan<T>, Plan<T>) {
        self.shared.padded.get_or_init(|| {
            let mut planner = FftPlanner::new();
            let m = self.padded_size();
            (planner.plan_fft_forward(m), planner.plan_fft_inverse(m))
        })
    }

    /// Maps a coarse per-axis FFT index to the padded grid, dropping Nyquist.
    fn pad_axis_map(&self) -> Vec<Option<usize>> {
        let m = self.padded_size() as i64;
        (0..self.n)
            .map(|i| {
                let k = self.wavenumber(i);
                if k == -(self.n as i64) / 2 {
                    None
                } else {
                    Some(k.rem_euclid(m) as usize)
                }
            })
            .collect()
    }

    fn padded_flat(&self, flat: usize, map: &[Option<usize>]) -> Option<usize> {
        let idx = self.axis_indices(flat);
        let m = self.padded_size();
        let mut out = 0;
        for &i in &idx[..self.dim] {
            out = out * m + map[i]?;
        }
        Some(out)
    }

    /// Physical values of `u` re-sampled on the 3N/2 grid (trigonometric
    /// interpolation with the Nyquist mode dropped).
    fn upsample(&self, u: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut coeffs = u.to_vec();
        self.dft(&mut coeffs, FftDirection::Forward);
        let map = self.pad_axis_map();
        let m = self.padded_size();
        let mut padded = vec![Complex::new(T::zero(), T::zero()); m.pow(self.dim as u32)];
        let norm = T::one() / T::from_usize_lossy(self.len());
        for (flat, c) in coeffs.iter().enumerate() {
            if let Some(target) = self.padded_flat(flat, &map) {
                padded[target] = *c * norm;
            }
        }
        transform_axes(&mut padded, m, self.dim, self.padded_plans().1.as_ref());
        padded
    }

    /// Projects values on the 3N/2 grid back to the N grid, keeping
    /// `|k| < N/2` on every axis.
    fn downsample(&self, mut fine: Vec<Complex<T>>) -> Vec<Complex<T>> {
        let m = self.padded_size();
        transform_axes(&mut fine, m, self.dim, self.padded_plans().0.as_ref());
        let map = self.pad_axis_map();
        let norm = T::one() / T::from_usize_lossy(m.pow(self.dim as u32));
        let zero = Complex::new(T::zero(), T::zero());
        let mut coarse: Vec<Complex<T>> = (0..self.len())
            .map(|flat| {
                self.padded_flat(flat, &map)
                    .map_or(zero, |source| fine[source] * norm)
            })
            .collect();
        self.dft(&mut coarse, FftDirection::Inverse);
        coarse
    }

    /// Alias-free product `a·b` of two sampled functions (3/2 zero padding).
    pub fn dealiased_product(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
        let fa = self.upsample(a);
        let fb = self.upsample(b);
        let prod = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        self.downsample(prod)
    }

    /// Alias-free `|a|²`.
    pub fn dealiased_abs_sq(&self, a: &[Complex<T>]) -> Vec<Complex<T>> {
        let fa = self.upsample(a);
        let sq = fa
            .iter()
            .map(|x| Complex::new(x.norm_sqr(), T::zero()))
            .collect();
        self.downsample(sq)
    }
}

fn transform_axes<T: Real>(data: &mut [Complex<T>], n: usize, dim: usize, plan: &dyn Fft<T>) {
    let total = n.pow(dim as u32);
    debug_assert_eq!(data.len(), total);
    let zero = Complex::new(T::zero(), T::zero());
    let mut scratch = vec![zero; plan.get_inplace_scratch_len()];
    for line in data.chunks_exact_mut(n) {
        plan.process_with_scratch(line, &mut scratch);
    }
    let mut line = vec![zero; n];
    for axis in 0..dim.saturating_sub(1) {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + j * stride] = *value;
                }
            }
        }
    }
}

fn all_finite<T: Real>(values: &[Complex<T>]) -> bool {
    values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Complex samples `u(x_j)` on a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: Grid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !all_finite(&values) {
            return Err(Error::InvalidField("non-finite sample".into()));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values produced by the solvers; callers
    /// check [`Field::is_finite`] where overflow is possible.
    pub(crate) fn from_raw(grid: Grid<T>, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        let values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        Self { grid, values }
    }

    /// Samples `f(x)`; `x` has `grid.dim()` components.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(&[T]) -> Complex<T>) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|flat| f(&grid.position(flat)[..dim]))
            .collect();
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: Grid<T>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        Self::from_fn(grid, |x| Complex::new(f(x), T::zero()))
    }

    /// `exp(-|x - center|² / (2 width²))`.
    pub fn gaussian(grid: Grid<T>, width: T) -> Result<Self> {
        let two_w2 = T::lit(2.0) * width * width;
        Self::from_real_fn(grid, |x| {
            let r2 = x.iter().fold(T::zero(), |acc, &c| acc + c * c);
            (-r2 / two_w2).exp()
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.values)
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self::from_raw(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn zip_with(
        &self,
        other: &Field<T>,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_raw(self.grid.clone(), values))
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product without dealiasing.
    pub fn mul(&self, other: &Field<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Alias-free product (3/2 zero padding).
    pub fn dealiased_mul(&self, other: &Field<T>) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.grid.dealiased_product(&self.values, &other.values);
        Ok(Self::from_raw(self.grid.clone(), values))
    }

    /// Cyclic shift by `shift[axis]` points: `v(x) = u(x - shift·dx)`.
    pub fn roll(&self, shift: &[usize]) -> Self {
        let n = self.grid.n();
        let dim = self.grid.dim();
        let mut out = self.values.clone();
        for (flat, v) in self.values.iter().enumerate() {
            let idx = self.grid.axis_indices(flat);
            let target = (0..dim).fold(0, |acc, a| {
                acc * n + (idx[a] + shift.get(a).copied().unwrap_or(0)) % n
            });
            out[target] = *v;
        }
        Self::from_raw(self.grid.clone(), out)
    }
}

/// Fourier samples `û(ξ_k)` in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: Grid<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(grid: Grid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} spectral samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !all_finite(&values) {
            return Err(Error::InvalidField("non-finite spectral sample".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid<T>, values: Vec<Complex<T>>) -> Self {
        Self { grid, values }
    }

    /// Samples a continuous transform `g(ξ)`.
    pub fn from_fn(grid: Grid<T>, g: impl Fn(&[T]) -> Complex<T>) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|flat| g(&grid.wavevector(flat)[..dim]))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.values)
    }
}

/// Physical → spectral under the `(2π)^{-d/2}` convention.
///
/// Non-finite input cannot reach this point: [`Field::new`] rejects it.
pub fn forward<T: Real>(u: &Field<T>) -> SpectralField<T> {
    let grid = u.grid.clone();
    let values = forward_raw(&grid, &u.values);
    SpectralField::from_raw(grid, values)
}

/// Spectral → physical, inverse of [`forward`].
pub fn inverse<T: Real>(v: &SpectralField<T>) -> Field<T> {
    let grid = v.grid.clone();
    let values = inverse_raw(&grid, &v.values);
    Field::from_raw(grid, values)
}

pub(crate) fn forward_raw<T: Real>(grid: &Grid<T>, u: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut values = u.to_vec();
    grid.dft(&mut values, FftDirection::Forward);
    let d = grid.dim() as i32;
    let scale = grid.cell_volume() / T::TAU().powf(T::lit(d as f64 / 2.0));
    apply_parity_scale(grid, &mut values, scale);
    values
}

pub(crate) fn inverse_raw<T: Real>(grid: &Grid<T>, v: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut values = v.to_vec();
    let d = grid.dim() as i32;
    let scale = grid.spectral_cell_volume() / T::TAU().powf(T::lit(d as f64 / 2.0));
    apply_parity_scale(grid, &mut values, scale);
    grid.dft(&mut values, FftDirection::Inverse);
    values
}

// The box starts at -L/2, which contributes (-1)^k per axis.
fn apply_parity_scale<T: Real>(grid: &Grid<T>, values: &mut [Complex<T>], scale: T) {
    for (flat, v) in values.iter_mut().enumerate() {
        let s = if grid.parity(flat) { -scale } else { scale };
        *v = *v * s;
    }
}

/// Fraction of the L² mass lying within `margin·L` of the box boundary on
/// any axis. A large value means the periodic box no longer stands in for ℝᵈ.
pub fn boundary_mass_fraction<T: Real>(u: &Field<T>, margin: T) -> Result<T> {
    if !(margin > T::zero() && margin < T::lit(0.5)) {
        return Err(Error::Domain(format!(
            "margin must lie in (0, 1/2), got {margin}"
        )));
    }
    let grid = u.grid();
    let n = grid.n();
    let cut = margin * T::from_usize_lossy(n);
    let in_shell = |flat: usize| {
        let idx = grid.axis_indices(flat);
        idx[..grid.dim()]
            .iter()
            .any(|&j| T::from_usize_lossy(j.min(n - 1 - j)) < cut)
    };
    let masses: Vec<(bool, T)> = u
        .values()
        .iter()
        .enumerate()
        .map(|(flat, v)| (in_shell(flat), v.norm_sqr()))
        .collect();
    let total = pairwise_map_sum(&masses, |&(_, m)| m);
    if total == T::zero() {
        return Ok(T::zero());
    }
    let outer = pairwise_map_sum(&masses, |&(s, m)| if s { m } else { T::zero() });
    Ok(outer / total)
}
