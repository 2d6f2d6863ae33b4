//! Lebesgue, Wiener and space–time norms, and Strichartz exponent bookkeeping.

use crate::grid::{forward, Field, Grid, SpectralField};
use crate::sum::{max_of, pairwise_map_sum, pairwise_sum};
use crate::{Error, Real, Result};

/// Quadrature `‖u‖_{L^p} = (dx^d Σ |u|^p)^{1/p}`; grid maximum for `p = ∞`.
pub fn norm_lp<T: Real>(u: &Field<T>, p: T) -> Result<T> {
    if p.is_nan() || p < T::one() {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    Ok(lp_of_samples(u.grid(), u.values(), p))
}

fn lp_of_samples<T: Real>(grid: &Grid<T>, values: &[num_complex::Complex<T>], p: T) -> T {
    if p.is_infinite() {
        return max_of(values.iter().map(|v| v.norm()));
    }
    let sum = if p == T::lit(2.0) {
        pairwise_map_sum(values, |v| v.norm_sqr())
    } else {
        pairwise_map_sum(values, |v| v.norm().powf(p))
    };
    (grid.cell_volume() * sum).powf(T::one() / p)
}

/// `‖u‖_W = ‖û‖_{L¹} = dξ^d Σ |û_k|`.
pub fn norm_wiener<T: Real>(u: &Field<T>) -> T {
    norm_wiener_spectral(&forward(u))
}

pub fn norm_wiener_spectral<T: Real>(v: &SpectralField<T>) -> T {
    v.grid().spectral_cell_volume() * pairwise_map_sum(v.values(), |c| c.norm())
}

/// `‖u‖_{L²∩W} = max(‖u‖_{L²}, ‖u‖_W)`.
pub fn norm_l2_cap_w<T: Real>(u: &Field<T>) -> T {
    let l2 = lp_of_samples(u.grid(), u.values(), T::lit(2.0));
    l2.max(norm_wiener(u))
}

/// Time samples `(t_m, u(t_m))` on one grid.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    times: Vec<T>,
    fields: Vec<Field<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(times: Vec<T>, fields: Vec<Field<T>>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::Domain(format!(
                "{} times but {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Domain(
                "a trajectory needs at least 2 samples".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("times must be strictly increasing".into()));
        }
        let grid = fields[0].grid();
        for f in &fields[1..] {
            grid.ensure_same(f.grid())?;
        }
        Ok(Self { times, fields })
    }

    /// Samples of `s ↦ f(s)` at the given times.
    pub fn sample(times: Vec<T>, f: impl Fn(T) -> Field<T>) -> Result<Self> {
        let fields = times.iter().map(|&t| f(t)).collect();
        Self::new(times, fields)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn fields(&self) -> &[Field<T>] {
        &self.fields
    }

    pub fn grid(&self) -> &Grid<T> {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (&T, &Field<T>) {
        (self.times.last().unwrap(), self.fields.last().unwrap())
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &Field<T>)> {
        self.times.iter().copied().zip(&self.fields)
    }
}

/// Composite trapezoid of `g(t_m)` over the sample times.
pub(crate) fn trapezoid<T: Real>(times: &[T], values: &[T]) -> T {
    let half = T::lit(0.5);
    let panels: Vec<T> = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| half * (t[1] - t[0]) * (v[0] + v[1]))
        .collect();
    pairwise_sum(&panels)
}

/// `‖u‖_{L^p(t₀,t_M; L^q)}`: composite trapezoid in time of `‖u(t)‖_q^p`, or
/// the sample supremum for `p = ∞`.
pub fn spacetime_norm<T: Real>(tr: &Trajectory<T>, p_time: T, q_space: T) -> Result<T> {
    if p_time.is_nan() || p_time < T::one() {
        return Err(Error::Domain(format!(
            "time exponent must be >= 1, got {p_time}"
        )));
    }
    let spatial = tr
        .fields
        .iter()
        .map(|f| norm_lp(f, q_space))
        .collect::<Result<Vec<T>>>()?;
    if p_time.is_infinite() {
        return Ok(max_of(spatial));
    }
    let powered: Vec<T> = spatial.iter().map(|v| v.powf(p_time)).collect();
    Ok(trapezoid(&tr.times, &powered).powf(T::one() / p_time))
}

/// Strichartz-admissible exponents: `2/p = d(1/2 - 1/q)`, `(p, q) ≠ (2, ∞)`.
/// `p` is the time exponent, `q` the space exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissiblePair<T> {
    pub p: T,
    pub q: T,
}

pub fn make_admissible<T: Real>(q_space: T, dim: usize) -> Result<AdmissiblePair<T>> {
    let two = T::lit(2.0);
    let d = T::from_usize_lossy(dim);
    let upper = if dim >= 3 {
        two * d / (d - two)
    } else {
        T::infinity()
    };
    if q_space.is_nan() || q_space < two || (dim >= 3 && q_space >= upper) {
        return Err(Error::Domain(format!(
            "space exponent must lie in [2, {upper}) for d = {dim}, got {q_space}"
        )));
    }
    let rate = d * (T::lit(0.5) - T::one() / q_space);
    let p = if rate == T::zero() {
        T::infinity()
    } else {
        two / rate
    };
    if p < two {
        return Err(Error::Domain(format!("time exponent {p} < 2")));
    }
    if p == two && q_space.is_infinite() {
        return Err(Error::Domain("(2, ∞) is not admissible".into()));
    }
    Ok(AdmissiblePair { p, q: q_space })
}

/// Exponents of the Strichartz contraction for the homogeneous kernel:
/// `q = 8/γ`, `r = 4d/(2d-γ)`, `θ = 8/(4-γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionExponents<T> {
    pub q: T,
    pub r: T,
    pub theta: T,
}

pub fn contraction_exponents<T: Real>(gamma: T, dim: usize) -> Result<ContractionExponents<T>> {
    let d = T::from_usize_lossy(dim);
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let eight = T::lit(8.0);
    if !(gamma > T::zero() && gamma < two.min(d)) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, min(2, {dim})), got {gamma}"
        )));
    }
    let q = eight / gamma;
    let r = four * d / (two * d - gamma);
    let theta = eight / (four - gamma);
    let one = T::one();
    let half = T::lit(0.5);
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let q_conj = one - one / q;
    let r_conj = one - one / r;
    let residuals = [
        q_conj - ((four - gamma) / four + one / q),
        q_conj - (half + one / theta),
        r_conj - (gamma / (two * d) + one / r),
        half - (one / theta + one / q),
    ];
    if let Some(bad) = residuals.iter().find(|e| e.abs() > tol) {
        return Err(Error::Domain(format!(
            "exponent identity violated by {bad}"
        )));
    }
    Ok(ContractionExponents { q, r, theta })
}
