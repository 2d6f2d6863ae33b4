//! Hartree kernels as real spectral multipliers `K̂(ξ_k)`.
//!
//! The nonlinearity is evaluated as `K ∗ g = (2π)^{d/2} F⁻¹(K̂ ĝ)`, so a kernel
//! is fully described by its multiplier on the grid frequencies.

use std::path::PathBuf;

use statrs::function::gamma::gamma as gamma_fn;

use crate::grid::Grid;
use crate::sum::{max_of, pairwise_map_sum};
use crate::{io, Error, Real, Result};

/// Continuous kernel families.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec<T> {
    /// `K(x) = λ|x|^{-γ}`, i.e. `K̂(ξ) = λ C(γ,d) |ξ|^{γ-d}`.
    Homogeneous { lambda: T, gamma: T },
    /// `K̂(ξ) = |ξ|^{γ-d} 1_{|ξ| ≤ radius}`.
    TruncatedLow { gamma: T, radius: T },
    /// `K̂_h(ξ) = |ξ|^{γ-d} 1_{|ξ| > 1/h}`.
    Tail { gamma: T, h: T },
    /// Multiplier samples from an HWF1 file (FFT order, imaginary part zero).
    FromFile { path: PathBuf },
    /// `K = δ`, `K̂ ≡ (2π)^{-d/2}`: the cubic NLS nonlinearity.
    Delta,
}

impl<T: Real> KernelSpec<T> {
    pub fn homogeneous(lambda: T, gamma: T) -> Self {
        KernelSpec::Homogeneous { lambda, gamma }
    }

    /// Low-frequency truncation at the unit radius.
    pub fn truncated_low(gamma: T) -> Self {
        KernelSpec::TruncatedLow {
            gamma,
            radius: T::one(),
        }
    }

    pub fn tail(gamma: T, h: T) -> Self {
        KernelSpec::Tail { gamma, h }
    }

    pub fn gamma(&self) -> Option<T> {
        match *self {
            KernelSpec::Homogeneous { gamma, .. }
            | KernelSpec::TruncatedLow { gamma, .. }
            | KernelSpec::Tail { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(gamma) = self.gamma() {
            check_gamma(gamma, dim)?;
        }
        match *self {
            KernelSpec::Homogeneous { lambda, .. } if !lambda.is_finite() => Err(Error::Domain(
                format!("lambda must be finite, got {lambda}"),
            )),
            KernelSpec::TruncatedLow { radius, .. }
                if !(radius > T::zero() && radius.is_finite()) =>
            {
                Err(Error::Domain(format!(
                    "truncation radius must be positive, got {radius}"
                )))
            }
            KernelSpec::Tail { h, .. } if !(h > T::zero() && h <= T::one()) => Err(Error::Domain(
                format!("tail scale h must lie in (0, 1], got {h}"),
            )),
            _ => Ok(()),
        }
    }

    /// Multiplier is unbounded at ξ = 0 in the continuum.
    fn is_singular_at_origin(&self) -> bool {
        match *self {
            KernelSpec::Homogeneous { lambda, .. } => lambda != T::zero(),
            KernelSpec::TruncatedLow { .. } => true,
            _ => false,
        }
    }
}

fn check_gamma<T: Real>(gamma: T, dim: usize) -> Result<()> {
    let d = T::from_usize_lossy(dim);
    if gamma > T::zero() && gamma < d {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "gamma must lie in (0, {dim}), got {gamma}"
        )))
    }
}

/// Value assigned to `K̂(0)` for kernels singular at the origin.
///
/// Any constant only shifts the potential by a constant, which multiplies
/// the solution by a global phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum ZeroModePolicy<T> {
    #[default]
    Zero,
    Value(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T: Real> {
    grid: Grid<T>,
    multiplier: Vec<T>,
    spec: KernelSpec<T>,
    zero_mode: ZeroModePolicy<T>,
}

impl<T: Real> Kernel<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// `K̂(ξ_k)` in FFT order.
    pub fn multiplier(&self) -> &[T] {
        &self.multiplier
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn zero_mode(&self) -> ZeroModePolicy<T> {
        self.zero_mode
    }

    pub fn is_zero(&self) -> bool {
        self.multiplier.iter().all(|&m| m == T::zero())
    }

    fn with_multiplier(&self, multiplier: Vec<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            multiplier,
            spec: self.spec.clone(),
            zero_mode: self.zero_mode,
        }
    }
}

/// `C(γ,d)` in `F[|x|^{-γ}](ξ) = C(γ,d) |ξ|^{γ-d}`:
/// `C = 2^{d/2-γ} Γ((d-γ)/2) / Γ(γ/2)`.
pub fn homogeneous_constant<T: Real>(gamma: T, dim: usize) -> Result<T> {
    check_gamma(gamma, dim)?;
    let g = gamma.as_f64();
    let d = dim as f64;
    let c = 2f64.powf(d / 2.0 - g) * gamma_fn((d - g) / 2.0) / gamma_fn(g / 2.0);
    Ok(T::lit(c))
}

pub fn materialize<T: Real>(spec: &KernelSpec<T>, grid: &Grid<T>) -> Result<Kernel<T>> {
    materialize_with_policy(spec, grid, ZeroModePolicy::Zero)
}

pub fn materialize_with_policy<T: Real>(
    spec: &KernelSpec<T>,
    grid: &Grid<T>,
    zero_mode: ZeroModePolicy<T>,
) -> Result<Kernel<T>> {
    spec.validate(grid.dim())?;
    let d = T::from_usize_lossy(grid.dim());
    let xi_abs = grid.xi_abs();
    let power = |r: T, gamma: T| r.powf(gamma - d);
    let mut multiplier: Vec<T> = match *spec {
        KernelSpec::Homogeneous { lambda, gamma } => {
            let scale = lambda * homogeneous_constant(gamma, grid.dim())?;
            xi_abs
                .iter()
                .map(|&r| {
                    if r > T::zero() {
                        scale * power(r, gamma)
                    } else {
                        T::zero()
                    }
                })
                .collect()
        }
        KernelSpec::TruncatedLow { gamma, radius } => xi_abs
            .iter()
            .map(|&r| {
                if r > T::zero() && r <= radius {
                    power(r, gamma)
                } else {
                    T::zero()
                }
            })
            .collect(),
        KernelSpec::Tail { gamma, h } => {
            let cut = T::one() / h;
            xi_abs
                .iter()
                .map(|&r| if r > cut { power(r, gamma) } else { T::zero() })
                .collect()
        }
        KernelSpec::Delta => {
            let c = T::TAU().powf(-d / T::lit(2.0));
            vec![c; grid.len()]
        }
        KernelSpec::FromFile { ref path } => read_multiplier(path, grid)?,
    };
    if spec.is_singular_at_origin() {
        multiplier[0] = match zero_mode {
            ZeroModePolicy::Zero => T::zero(),
            ZeroModePolicy::Value(c) => c,
        };
    }
    Ok(Kernel {
        grid: grid.clone(),
        multiplier,
        spec: spec.clone(),
        zero_mode,
    })
}

fn read_multiplier<T: Real>(path: &std::path::Path, grid: &Grid<T>) -> Result<Vec<T>> {
    let field = io::read_field_on::<T>(path, grid)?;
    if let Some(c) = field.values().iter().find(|c| c.im != T::zero()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("multiplier must be real, found imaginary part {}", c.im),
        });
    }
    Ok(field.values().iter().map(|c| c.re).collect())
}

/// Writes a kernel multiplier as an HWF1 file readable by `FromFile`.
pub fn write_multiplier<T: Real>(
    kernel: &Kernel<T>,
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let values = kernel
        .multiplier
        .iter()
        .map(|&m| num_complex::Complex::new(m, T::zero()))
        .collect();
    let field = crate::grid::Field::new(kernel.grid.clone(), values)?;
    io::write_field(&field, path)
}

/// `(κ₁, κ₂)` with `κ₁ = 1_{|ξ|≤1} K̂` and `κ₂ = 1_{|ξ|>1} K̂`.
pub fn split_low_high<T: Real>(kernel: &Kernel<T>) -> (Kernel<T>, Kernel<T>) {
    split_at(kernel, T::one())
}

pub fn split_at<T: Real>(kernel: &Kernel<T>, radius: T) -> (Kernel<T>, Kernel<T>) {
    let xi_sq = kernel.grid.xi_sq();
    let r2 = radius * radius;
    let (low, high): (Vec<T>, Vec<T>) = kernel
        .multiplier
        .iter()
        .zip(xi_sq)
        .map(|(&m, &s)| {
            if s <= r2 {
                (m, T::zero())
            } else {
                (T::zero(), m)
            }
        })
        .unzip();
    (kernel.with_multiplier(low), kernel.with_multiplier(high))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MultiplierNorm<T> {
    Finite(T),
    /// The continuum multiplier is not in `L^q`; the grid sum would only
    /// measure the discretization.
    Divergent,
}

impl<T: Copy> MultiplierNorm<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            MultiplierNorm::Finite(v) => Some(v),
            MultiplierNorm::Divergent => None,
        }
    }
}

/// Quadrature `L^q` norm of the multiplier, `(dξ^d Σ |K̂|^q)^{1/q}`, or its
/// maximum for `q = ∞`.
pub fn multiplier_lq_norm<T: Real>(kernel: &Kernel<T>, q: T) -> Result<MultiplierNorm<T>> {
    if q.is_nan() || q < T::one() {
        return Err(Error::Domain(format!("q must be >= 1, got {q}")));
    }
    let d = T::from_usize_lossy(kernel.grid.dim());
    let infinite = q.is_infinite();
    let divergent = match *kernel.spec() {
        KernelSpec::Homogeneous { lambda, .. } => lambda != T::zero(),
        KernelSpec::TruncatedLow { gamma, .. } => infinite || (d - gamma) * q >= d,
        KernelSpec::Tail { gamma, .. } => !infinite && (d - gamma) * q <= d,
        KernelSpec::Delta => !infinite,
        KernelSpec::FromFile { .. } => false,
    };
    if divergent {
        return Ok(MultiplierNorm::Divergent);
    }
    if infinite {
        return Ok(MultiplierNorm::Finite(max_of(
            kernel.multiplier.iter().map(|m| m.abs()),
        )));
    }
    let sum = pairwise_map_sum(&kernel.multiplier, |m| m.abs().powf(q));
    Ok(MultiplierNorm::Finite(
        (kernel.grid.spectral_cell_volume() * sum).powf(T::one() / q),
    ))
}

/// Surface area of the unit sphere in ℝᵈ.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma_fn(d / 2.0)
}

/// Continuum `‖K̂_h‖_{L^q} = (ω_{d-1} / ((d-γ)q - d))^{1/q} h^{d-γ-d/q}`.
pub fn tail_lq_norm_closed_form(gamma: f64, h: f64, q: f64, dim: usize) -> MultiplierNorm<f64> {
    let d = dim as f64;
    if q.is_infinite() {
        return MultiplierNorm::Finite(h.powf(d - gamma));
    }
    let excess = (d - gamma) * q - d;
    if excess <= 0.0 {
        return MultiplierNorm::Divergent;
    }
    MultiplierNorm::Finite(
        (unit_sphere_area(dim) / excess).powf(1.0 / q) * h.powf(d - gamma - d / q),
    )
}

/// Numerical route to `C(γ,1)` that does not use the Gamma-ratio formula.
pub mod oracle {
    use num_complex::Complex;

    use crate::grid::{forward, Field, Grid};
    use crate::special::zeta;
    use crate::{Error, Result};

    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct MollifiedEstimate {
        /// Median of `F[|x|^{-γ} e^{-(x/σ)²}](ξ) / |ξ|^{γ-1}` over the band.
        pub constant: f64,
        pub min_ratio: f64,
        pub max_ratio: f64,
        pub samples: usize,
    }

    /// Transforms `|x|^{-γ} e^{-(x/σ)²}` on a 1-D grid and reads the ratio to
    /// `|ξ|^{γ-1}` for `band.0 ≤ |ξ| ≤ band.1`.
    ///
    /// The sample at `x = 0` carries the generalized Euler–Maclaurin weight
    /// `-2ζ(γ) dx^{-γ}`, which makes the trapezoid sum of the integrable
    /// singularity accurate to `O(dx^{3-γ})`.
    pub fn mollified_constant(
        gamma: f64,
        sigma: f64,
        n: usize,
        length: f64,
        band: (f64, f64),
    ) -> Result<MollifiedEstimate> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!(
                "oracle needs 0 < gamma < 1, got {gamma}"
            )));
        }
        if !(sigma > 0.0 && band.0 > 0.0 && band.1 > band.0) {
            return Err(Error::Domain(
                "oracle needs sigma > 0 and a positive band".into(),
            ));
        }
        let grid = Grid::<f64>::new(1, n, length)?;
        let dx = grid.dx();
        let origin = -2.0 * zeta(gamma) * dx.powf(-gamma);
        let u = Field::from_real_fn(grid.clone(), |x| {
            let r = x[0].abs();
            if r == 0.0 {
                origin
            } else {
                r.powf(-gamma) * (-(x[0] / sigma).powi(2)).exp()
            }
        })?;
        let spectrum = forward(&u);
        let mut ratios: Vec<f64> = spectrum
            .values()
            .iter()
            .zip(grid.xi_abs())
            .filter(|&(_, r)| r >= band.0 && r <= band.1)
            .map(|(c, r): (&Complex<f64>, f64)| c.re / r.powf(gamma - 1.0))
            .collect();
        if ratios.is_empty() {
            return Err(Error::Domain(
                "no grid frequency inside the oracle band".into(),
            ));
        }
        ratios.sort_by(f64::total_cmp);
        let mid = ratios.len() / 2;
        let constant = if ratios.len().is_multiple_of(2) {
            0.5 * (ratios[mid - 1] + ratios[mid])
        } else {
            ratios[mid]
        };
        Ok(MollifiedEstimate {
            constant,
            min_ratio: ratios[0],
            max_ratio: ratios[ratios.len() - 1],
            samples: ratios.len(),
        })
    }
}
