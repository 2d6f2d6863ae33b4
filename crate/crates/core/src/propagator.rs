//! The free Schrödinger group `e^{itΔ}`: the Fourier multiplier `e^{-it|ξ|²}`.

use num_complex::Complex;

use crate::grid::{forward_raw, inverse_raw, Field, Grid};
use crate::norms::{norm_lp, spacetime_norm, AdmissiblePair, Trajectory};
use crate::{Error, Real, Result};

/// Multiplies spectral samples by `e^{-it|ξ|²}` in place.
pub(crate) fn apply_free_phase<T: Real>(grid: &Grid<T>, values: &mut [Complex<T>], t: T) {
    if t == T::zero() {
        return;
    }
    for (v, &s) in values.iter_mut().zip(grid.xi_sq()) {
        *v = *v * Complex::from_polar(T::one(), -t * s);
    }
}

pub fn free_evolve<T: Real>(u: &Field<T>, t: T) -> Field<T> {
    if t == T::zero() {
        return u.clone();
    }
    let grid = u.grid();
    let mut spec = forward_raw(grid, u.values());
    apply_free_phase(grid, &mut spec, t);
    Field::from_raw(grid.clone(), inverse_raw(grid, &spec))
}

/// `M` equispaced samples of the free flow on `[0, t_final]`.
pub fn free_trajectory<T: Real>(
    u0: &Field<T>,
    t_final: T,
    samples: usize,
) -> Result<Trajectory<T>> {
    if samples < 2 || !(t_final > T::zero()) {
        return Err(Error::Domain(
            "free trajectory needs T > 0 and >= 2 samples".into(),
        ));
    }
    let grid = u0.grid();
    let spec0 = forward_raw(grid, u0.values());
    let step = t_final / T::from_usize_lossy(samples - 1);
    let times: Vec<T> = (0..samples)
        .map(|m| step * T::from_usize_lossy(m))
        .collect();
    let fields = times
        .iter()
        .map(|&t| {
            let mut s = spec0.clone();
            apply_free_phase(grid, &mut s, t);
            if t == T::zero() {
                u0.clone()
            } else {
                Field::from_raw(grid.clone(), inverse_raw(grid, &s))
            }
        })
        .collect();
    Trajectory::new(times, fields)
}

/// `‖e^{itΔ}u₀‖_{L^p([0,T]; L^q)} / ‖u₀‖_{L²}` from `M` time samples.
pub fn strichartz_ratio<T: Real>(
    u0: &Field<T>,
    pair: AdmissiblePair<T>,
    t_final: T,
    samples: usize,
) -> Result<T> {
    if samples < 16 {
        return Err(Error::Domain(format!(
            "need M >= 16 time samples, got {samples}"
        )));
    }
    let l2 = norm_lp(u0, T::lit(2.0))?;
    if l2 == T::zero() {
        return Err(Error::Domain("initial datum is zero".into()));
    }
    let tr = free_trajectory(u0, t_final, samples)?;
    Ok(spacetime_norm(&tr, pair.p, pair.q)? / l2)
}
