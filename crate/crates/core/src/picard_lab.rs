//! Second Picard iterate and norm-inflation experiments.
//!
//! `D(f)(t) = −i ∫₀ᵗ e^{i(t−τ)Δ} (K∗|e^{iτΔ}f|²) e^{iτΔ}f dτ` is evaluated
//! by composite trapezoid in `τ` in the interaction picture.
//!
//! Scaled data `f^h(x) = f(hx)` live on co-scaled grids: for fixed `N`, the
//! box for `h` has length `L₀/h`. The samples of `f^h` on that grid are the
//! samples of `f` on the base grid, so every member of a family is resolved
//! equally well in both physical and frequency space.

use std::path::PathBuf;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::hartree_rhs;
use crate::grid::{forward_raw, inverse_raw, Field, Grid};
use crate::kernels::{materialize, multiplier_lq_norm, Kernel, KernelSpec};
use crate::norms::{norm_lp, norm_wiener};
use crate::propagator::apply_free_phase;
use crate::{io, Error, Real, Result};

/// `D(f)(t)` with `n_quad` trapezoid nodes on `[0, t]`.
pub fn second_iterate<T: Real>(
    f: &Field<T>,
    kernel: &Kernel<T>,
    t: T,
    n_quad: usize,
) -> Result<Field<T>> {
    let grid = f.grid();
    grid.ensure_same(kernel.grid())?;
    if n_quad < 16 {
        return Err(Error::Domain(format!("n_quad must be >= 16, got {n_quad}")));
    }
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if t == T::zero() || kernel.is_zero() {
        return Ok(Field::zeros(grid.clone()));
    }
    let step = t / T::from_usize_lossy(n_quad - 1);
    let spec0 = forward_raw(grid, f.values());
    let pulled: Vec<Vec<Complex<T>>> = (0..n_quad)
        .into_par_iter()
        .map(|j| {
            let tau = step * T::from_usize_lossy(j);
            let mut s = spec0.clone();
            apply_free_phase(grid, &mut s, tau);
            let free = Field::from_raw(grid.clone(), inverse_raw(grid, &s));
            let rhs = hartree_rhs(&free, kernel).expect("grids checked above");
            let mut n_hat = forward_raw(grid, rhs.values());
            apply_free_phase(grid, &mut n_hat, -tau);
            let w = if j == 0 || j == n_quad - 1 {
                step * T::lit(0.5)
            } else {
                step
            };
            n_hat.iter_mut().for_each(|v| *v = *v * w);
            n_hat
        })
        .collect();
    let minus_i = Complex::new(T::zero(), -T::one());
    let mut acc = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for node in &pulled {
        for (a, v) in acc.iter_mut().zip(node) {
            *a = *a + *v;
        }
    }
    acc.iter_mut().for_each(|a| *a = minus_i * *a);
    apply_free_phase(grid, &mut acc, t);
    Ok(Field::from_raw(grid.clone(), inverse_raw(grid, &acc)))
}

/// Base profile `f` of a scaled family.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile<T> {
    /// `exp(-|x|²/(2 width²))`.
    Gaussian { width: T },
    /// Samples read from an HWF1 file; the file's grid is the base grid.
    File(PathBuf),
}

/// `{f^h : h ∈ h_values}` on co-scaled grids of a base grid.
#[derive(Clone, Debug)]
pub struct ScaledFamily<T: Real> {
    base: Field<T>,
    h_values: Vec<T>,
}

impl<T: Real> ScaledFamily<T> {
    /// `h_values` must be strictly decreasing and lie in `(0, 1]`.
    pub fn new(profile: &Profile<T>, base_grid: &Grid<T>, h_values: Vec<T>) -> Result<Self> {
        let base = match profile {
            Profile::Gaussian { width } => {
                if !(*width > T::zero()) {
                    return Err(Error::Domain(format!(
                        "profile width must be > 0, got {width}"
                    )));
                }
                Field::gaussian(base_grid.clone(), *width)?
            }
            Profile::File(path) => io::read_field_on(path, base_grid)?,
        };
        Self::from_field(base, h_values)
    }

    pub fn from_field(base: Field<T>, h_values: Vec<T>) -> Result<Self> {
        if h_values.is_empty() {
            return Err(Error::Domain("empty h list".into()));
        }
        if let Some(h) = h_values
            .iter()
            .find(|&&h| !(h > T::zero() && h <= T::one()))
        {
            return Err(Error::Domain(format!("h must lie in (0, 1], got {h}")));
        }
        if h_values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Domain("h values must be strictly decreasing".into()));
        }
        Ok(Self { base, h_values })
    }

    pub fn base(&self) -> &Field<T> {
        &self.base
    }

    pub fn h_values(&self) -> &[T] {
        &self.h_values
    }

    /// `f^h` on the grid of length `L₀/h`.
    pub fn member(&self, h: T) -> Result<Field<T>> {
        let grid = self.base.grid().coscaled(h)?;
        Ok(Field::from_raw(grid, self.base.values().to_vec()))
    }
}

fn require_homogeneous<T: Real>(spec: &KernelSpec<T>) -> Result<T> {
    match *spec {
        KernelSpec::Homogeneous { gamma, .. } => Ok(gamma),
        _ => Err(Error::UnsupportedKernel(
            "the scaling identity holds for homogeneous kernels only".into(),
        )),
    }
}

/// Relative residual of `‖D(f^h)(t)‖_W = h^{-(d-γ+2)} ‖D(f)(th²)‖_W`, left
/// side on the co-scaled grid, right side on the base grid.
pub fn scaling_identity_residual<T: Real>(
    family: &ScaledFamily<T>,
    spec: &KernelSpec<T>,
    t: T,
    h: T,
    n_quad: usize,
) -> Result<T> {
    let gamma = require_homogeneous(spec)?;
    if !family.h_values.contains(&h) {
        return Err(Error::Domain(format!("h = {h} is not part of the family")));
    }
    let d = T::from_usize_lossy(family.base.grid().dim());
    let fh = family.member(h)?;
    let kh = materialize(spec, fh.grid())?;
    let lhs = norm_wiener(&second_iterate(&fh, &kh, t, n_quad)?);
    let k0 = materialize(spec, family.base.grid())?;
    let inner = norm_wiener(&second_iterate(&family.base, &k0, t * h * h, n_quad)?);
    let rhs = h.powf(-(d - gamma + T::lit(2.0))) * inner;
    if rhs == T::zero() {
        return Ok(if lhs == T::zero() {
            T::zero()
        } else {
            T::infinity()
        });
    }
    Ok((lhs - rhs).abs() / rhs)
}

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for two points).
    pub slope_stderr: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let slope_stderr = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        rms_residual: (sse / nf).sqrt(),
    })
}

/// Fits need this many points; fewer gives no fit rather than a noisy one.
pub const MIN_FIT_POINTS: usize = 5;

/// Tail correction of the truncated kernel at one `h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Serialize")]
pub struct TailCorrection<T> {
    pub h: T,
    /// `X^h = ‖D_{K_h}(f)(th²)‖_W` on the base grid, `K̂_h = |ξ|^{γ-d}1_{|ξ|>1/h}`.
    pub actual: T,
    /// `t h² ‖K̂_h‖_{L^q}` (the estimate without its constant).
    pub bound: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Serialize")]
pub struct InflationReport<T> {
    pub t: T,
    pub h_values: Vec<T>,
    /// `‖D(f^h)(t)‖_W` per `h`.
    pub values: Vec<T>,
    /// Log–log fit of `values` against `h`; `None` with fewer than
    /// [`MIN_FIT_POINTS`] points or any zero value.
    pub fit: Option<LineFit>,
    /// `values · h^{d-γ}`.
    pub compensated: Vec<T>,
    /// `t·‖(K∗|f|²)f‖_W` on the base grid.
    pub leading_term: T,
    /// Values strictly increase as `h` decreases.
    pub monotone_increasing: bool,
    pub f_wiener: Vec<T>,
    pub f_l2: Vec<T>,
    /// Truncated kernels only.
    pub tail: Option<Vec<TailCorrection<T>>>,
    pub tail_exponent_q: Option<T>,
}

/// Evaluates `‖D(f^h)(t)‖_W` over the family, one co-scaled grid per `h`.
pub fn inflation_sweep<T: Real>(
    family: &ScaledFamily<T>,
    spec: &KernelSpec<T>,
    t: T,
    n_quad: usize,
) -> Result<InflationReport<T>> {
    if family.h_values.len() < 3 {
        return Err(Error::Domain(format!(
            "an inflation sweep needs at least 3 h values, got {}",
            family.h_values.len()
        )));
    }
    if !(t > T::zero()) {
        return Err(Error::Domain(format!("t must be > 0, got {t}")));
    }
    let base_grid = family.base.grid();
    let dim = base_grid.dim();
    let d = T::from_usize_lossy(dim);
    spec.validate(dim)?;
    let gamma = spec.gamma();

    struct Point<T> {
        value: T,
        f_w: T,
        f_l2: T,
    }
    let points: Vec<Point<T>> = family
        .h_values
        .par_iter()
        .map(|&h| -> Result<Point<T>> {
            let fh = family.member(h)?;
            let kh = materialize(spec, fh.grid())?;
            let value = norm_wiener(&second_iterate(&fh, &kh, t, n_quad)?);
            Ok(Point {
                value,
                f_w: norm_wiener(&fh),
                f_l2: norm_lp(&fh, T::lit(2.0))?,
            })
        })
        .collect::<Result<_>>()?;

    let values: Vec<T> = points.iter().map(|p| p.value).collect();
    let fit = if values.len() >= MIN_FIT_POINTS && values.iter().all(|&v| v > T::zero()) {
        let logs: Vec<(f64, f64)> = family
            .h_values
            .iter()
            .zip(&values)
            .map(|(h, v)| (h.as_f64().ln(), v.as_f64().ln()))
            .collect();
        least_squares_slope(&logs)
    } else {
        None
    };
    let exponent = gamma.map_or(T::zero(), |g| d - g);
    let compensated = family
        .h_values
        .iter()
        .zip(&values)
        .map(|(&h, &v)| v * h.powf(exponent))
        .collect();
    let k0 = materialize(spec, base_grid)?;
    let leading_term = t * norm_wiener(&hartree_rhs(&family.base, &k0)?);
    let monotone_increasing = values.windows(2).all(|w| w[1] > w[0]);

    let (tail, tail_exponent_q) = match *spec {
        KernelSpec::TruncatedLow { gamma, .. } => {
            let q = T::lit(2.0) * d / (d - gamma);
            let tail = family
                .h_values
                .par_iter()
                .map(|&h| -> Result<TailCorrection<T>> {
                    let kt = materialize(&KernelSpec::tail(gamma, h), base_grid)?;
                    let actual =
                        norm_wiener(&second_iterate(&family.base, &kt, t * h * h, n_quad)?);
                    let bound = multiplier_lq_norm(&kt, q)?.value().map(|n| t * h * h * n);
                    Ok(TailCorrection { h, actual, bound })
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(tail), Some(q))
        }
        _ => (None, None),
    };

    Ok(InflationReport {
        t,
        h_values: family.h_values.clone(),
        values,
        fit,
        compensated,
        leading_term,
        monotone_increasing,
        f_wiener: points.iter().map(|p| p.f_w).collect(),
        f_l2: points.iter().map(|p| p.f_l2).collect(),
        tail,
        tail_exponent_q,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Serialize")]
pub struct TaylorFit<T> {
    /// Coefficient `a` of `‖D(f)(s)‖_W ≈ a s + b s²`.
    pub linear_coeff: T,
    pub quadratic_coeff: T,
    /// `‖(K∗|f|²)f‖_W`, the predicted `a`.
    pub g0_wiener: T,
    /// Log–log slope of `‖D(f)(s) + i s (K∗|f|²)f‖_W` against `s`;
    /// `None` when the remainder vanishes.
    pub remainder_order: Option<f64>,
    pub s_values: Vec<T>,
    pub values: Vec<T>,
    pub remainders: Vec<T>,
}

/// Small-time expansion of `s ↦ ‖D(f)(s)‖_W`.
pub fn taylor_fit<T: Real>(
    f: &Field<T>,
    kernel: &Kernel<T>,
    s_values: &[T],
    n_quad: usize,
) -> Result<TaylorFit<T>> {
    if s_values.len() < 4 {
        return Err(Error::Domain(format!(
            "need >= 4 s values, got {}",
            s_values.len()
        )));
    }
    if s_values.windows(2).any(|w| !(w[1] < w[0])) || !(s_values[s_values.len() - 1] > T::zero()) {
        return Err(Error::Domain(
            "s values must be positive and strictly decreasing".into(),
        ));
    }
    if s_values[0] / s_values[s_values.len() - 1] < T::lit(10.0) * (T::one() - T::lit(1e-9)) {
        return Err(Error::Domain(
            "s values must span at least one decade".into(),
        ));
    }
    let g0 = hartree_rhs(f, kernel)?;
    let g0_wiener = norm_wiener(&g0);
    let mut values = Vec::with_capacity(s_values.len());
    let mut remainders = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let dfs = second_iterate(f, kernel, s, n_quad)?;
        values.push(norm_wiener(&dfs));
        // D(f)(s) − s·(−i g0)
        let rem = dfs.zip_with(&g0, |a, b| a + Complex::new(-b.im, b.re) * s)?;
        remainders.push(norm_wiener(&rem));
    }

    // Normal equations for y = a s + b s².
    let (mut s2, mut s3, mut s4, mut ys, mut ys2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&s, &y) in s_values.iter().zip(&values) {
        let (s, y) = (s.as_f64(), y.as_f64());
        s2 += s * s;
        s3 += s * s * s;
        s4 += s * s * s * s;
        ys += y * s;
        ys2 += y * s * s;
    }
    let det = s2 * s4 - s3 * s3;
    if !(det.abs() > 0.0) {
        return Err(Error::Domain("degenerate Taylor fit".into()));
    }
    let a = (ys * s4 - ys2 * s3) / det;
    let b = (s2 * ys2 - s3 * ys) / det;

    let remainder_order = if remainders.iter().all(|&r| r > T::zero()) {
        let logs: Vec<(f64, f64)> = s_values
            .iter()
            .zip(&remainders)
            .map(|(s, r)| (s.as_f64().ln(), r.as_f64().ln()))
            .collect();
        least_squares_slope(&logs).map(|f| f.slope)
    } else {
        None
    };
    Ok(TaylorFit {
        linear_coeff: T::lit(a),
        quadratic_coeff: T::lit(b),
        g0_wiener,
        remainder_order,
        s_values: s_values.to_vec(),
        values,
        remainders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_grid(n: usize) -> Grid<f64> {
        Grid::new(1, n, 40.0).unwrap()
    }

    fn family(n: usize, hs: Vec<f64>) -> ScaledFamily<f64> {
        ScaledFamily::new(&Profile::Gaussian { width: 1.0 }, &base_grid(n), hs).unwrap()
    }

    #[test]
    fn zero_time_and_zero_kernel() {
        let g = base_grid(256);
        let f = Field::gaussian(g.clone(), 1.0).unwrap();
        let k = materialize(&KernelSpec::homogeneous(1.0, 0.4), &g).unwrap();
        let d = second_iterate(&f, &k, 0.0, 16).unwrap();
        assert!(d.values().iter().all(|c| c.norm() == 0.0));
        let k0 = materialize(&KernelSpec::homogeneous(0.0, 0.4), &g).unwrap();
        let d = second_iterate(&f, &k0, 0.1, 16).unwrap();
        assert!(d.values().iter().all(|c| c.norm() == 0.0));
        assert!(second_iterate(&f, &k, 0.1, 8).is_err());
    }

    #[test]
    fn small_time_slope_is_rhs_norm() {
        let g = base_grid(1024);
        let f = Field::gaussian(g.clone(), 1.0).unwrap();
        let k = materialize(&KernelSpec::homogeneous(1.0, 0.4), &g).unwrap();
        let s = 1e-3;
        let ratio = norm_wiener(&second_iterate(&f, &k, s, 32).unwrap()) / s;
        let g0 = norm_wiener(&hartree_rhs(&f, &k).unwrap());
        assert!((ratio / g0 - 1.0).abs() < 1e-2, "{ratio} vs {g0}");
    }

    #[test]
    fn family_members_keep_wiener_and_scale_l2() {
        let fam = family(1024, vec![1.0, 0.5, 0.25, 0.125]);
        let f = fam.base();
        let w = norm_wiener(f);
        let l2 = norm_lp(f, 2.0).unwrap();
        for &h in fam.h_values() {
            let fh = fam.member(h).unwrap();
            assert!((norm_wiener(&fh) / w - 1.0).abs() < 5e-3);
            let expected = l2 * h.powf(-0.5);
            assert!((norm_lp(&fh, 2.0).unwrap() / expected - 1.0).abs() < 5e-3);
        }
    }

    #[test]
    fn family_validation() {
        let g = base_grid(64);
        let p = Profile::Gaussian { width: 1.0 };
        assert!(ScaledFamily::new(&p, &g, vec![1.0, 1.0]).is_err());
        assert!(ScaledFamily::new(&p, &g, vec![1.5, 0.5]).is_err());
        assert!(ScaledFamily::new(&p, &g, vec![0.5, 0.0]).is_err());
        assert!(ScaledFamily::new(&p, &g, vec![]).is_err());
    }

    #[test]
    fn identity_residual_at_unit_h_is_zero() {
        let fam = family(512, vec![1.0, 0.5]);
        let r = scaling_identity_residual(&fam, &KernelSpec::homogeneous(1.0, 0.4), 0.1, 1.0, 32)
            .unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn identity_residual_is_small() {
        let fam = family(512, vec![1.0, 0.5, 0.25]);
        for h in [0.5, 0.25] {
            let r = scaling_identity_residual(&fam, &KernelSpec::homogeneous(1.0, 0.4), 0.1, h, 32)
                .unwrap();
            assert!(r <= 1e-2, "h={h}: {r}");
        }
    }

    #[test]
    fn identity_rejects_other_kernels() {
        let fam = family(64, vec![1.0, 0.5]);
        let err = scaling_identity_residual(&fam, &KernelSpec::truncated_low(0.4), 0.1, 0.5, 16);
        assert!(matches!(err, Err(Error::UnsupportedKernel(_))));
        let err = scaling_identity_residual(&fam, &KernelSpec::homogeneous(1.0, 0.4), 0.1, 0.3, 16);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn zero_kernel_sweep_rejects_fit() {
        let fam = family(256, vec![1.0, 0.7, 0.5, 0.35, 0.25]);
        let r = inflation_sweep(&fam, &KernelSpec::homogeneous(0.0, 0.4), 0.05, 16).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert!(r.fit.is_none());
        assert!(r.tail.is_none());
    }

    #[test]
    fn sweep_needs_three_points() {
        let fam = family(64, vec![1.0, 0.5]);
        assert!(inflation_sweep(&fam, &KernelSpec::homogeneous(1.0, 0.4), 0.05, 16).is_err());
    }

    #[test]
    fn truncated_sweep_reports_tail() {
        let fam = family(512, vec![1.0, 0.5, 0.25]);
        let r = inflation_sweep(&fam, &KernelSpec::truncated_low(0.4), 0.05, 16).unwrap();
        let tail = r.tail.unwrap();
        assert_eq!(tail.len(), 3);
        assert!((r.tail_exponent_q.unwrap() - 2.0 / 0.6).abs() < 1e-12);
        for c in &tail {
            assert!(c.actual >= 0.0 && c.bound.unwrap() > 0.0);
        }
        // fewer than MIN_FIT_POINTS
        assert!(r.fit.is_none());
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let fit = least_squares_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14 && (fit.intercept - 3.0).abs() < 1e-14);
        assert!(fit.slope_stderr < 1e-12);
        assert!(least_squares_slope(&[(1.0, 1.0)]).is_none());
        assert!(least_squares_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn taylor_validation_and_zero_kernel() {
        let g = base_grid(256);
        let f = Field::gaussian(g.clone(), 1.0).unwrap();
        let k0 = materialize(&KernelSpec::homogeneous(0.0, 0.4), &g).unwrap();
        let s = [1e-2, 5e-3, 2e-3, 1e-3];
        let fit = taylor_fit(&f, &k0, &s, 16).unwrap();
        assert_eq!(fit.linear_coeff, 0.0);
        assert!(fit.remainder_order.is_none());
        assert!(taylor_fit(&f, &k0, &s[..3], 16).is_err());
        assert!(taylor_fit(&f, &k0, &[1e-2, 8e-3, 6e-3, 4e-3], 16).is_err());
    }
}
