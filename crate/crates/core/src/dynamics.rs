//! Hartree nonlinearity and time integrators.
//!
//! Two integrators share [`hartree_rhs`]:
//!
//! - [`picard_solve`] iterates the Duhamel map
//!   `Φ(u)(t) = e^{itΔ}u₀ − i∫₀ᵗ e^{i(t−τ)Δ}(K∗|u|²)u(τ) dτ`
//!   on fixed time nodes, composite trapezoid in `τ`;
//! - [`splitstep_solve`] is a Strang splitting used as a reference.
//!
//! The fixed-point metric is the sup over nodes of `‖·‖_{L²∩W}`, which is
//! stronger than the Strichartz metric used for the homogeneous problem in
//! the literature; it is used uniformly here.

use num_complex::Complex;
use rayon::prelude::*;

use crate::grid::{forward_raw, inverse_raw, Field, Grid};
use crate::kernels::Kernel;
use crate::norms::{norm_l2_cap_w, norm_lp, norm_wiener, Trajectory};
use crate::propagator::apply_free_phase;
use crate::sum::{max_of, pairwise_map_sum};
use crate::{Error, Real, Result};

/// `(K∗ρ)` for a sampled density, `(2π)^{d/2}·F⁻¹(K̂·F ρ)`.
fn convolve<T: Real>(kernel: &Kernel<T>, rho: &[Complex<T>]) -> Vec<Complex<T>> {
    let grid = kernel.grid();
    let mut spec = forward_raw(grid, rho);
    let tau_pow = T::TAU().powf(T::from_usize_lossy(grid.dim()) / T::lit(2.0));
    for (v, &m) in spec.iter_mut().zip(kernel.multiplier()) {
        *v = *v * (m * tau_pow);
    }
    inverse_raw(grid, &spec)
}

/// The potential `K∗|u|²` (complex samples; real up to roundoff for real
/// even multipliers).
pub fn potential<T: Real>(u: &Field<T>, kernel: &Kernel<T>) -> Result<Vec<Complex<T>>> {
    u.grid().ensure_same(kernel.grid())?;
    let rho = u.grid().dealiased_abs_sq(u.values());
    Ok(convolve(kernel, &rho))
}

/// `(K∗|u|²)u` with both products dealiased.
pub fn hartree_rhs<T: Real>(u: &Field<T>, kernel: &Kernel<T>) -> Result<Field<T>> {
    let v = potential(u, kernel)?;
    let grid = u.grid();
    Ok(Field::from_raw(
        grid.clone(),
        grid.dealiased_product(&v, u.values()),
    ))
}

/// `max(‖·‖_{L²}, ‖·‖_W)` from spectral samples (Parseval for the L² part).
fn cap_norm_spectral<T: Real>(grid: &Grid<T>, v: &[Complex<T>]) -> T {
    let w = grid.spectral_cell_volume();
    let l2 = (w * pairwise_map_sum(v, |c| c.norm_sqr())).sqrt();
    let l1 = w * pairwise_map_sum(v, |c| c.norm());
    l2.max(l1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig<T> {
    pub t_final: T,
    pub n_time: usize,
    pub tol: T,
    pub max_iter: usize,
    pub ball_factor: T,
}

impl<T: Real> PicardConfig<T> {
    pub fn new(t_final: T) -> Self {
        Self {
            t_final,
            n_time: 129,
            tol: T::lit(1e-10),
            max_iter: 50,
            ball_factor: T::lit(2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > T::zero()) || !self.t_final.is_finite() {
            return Err(Error::Config(format!(
                "picard T must be > 0, got {}",
                self.t_final
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!(
                "picard tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.n_time < 8 {
            return Err(Error::Config(format!(
                "picard n_time must be >= 8, got {}",
                self.n_time
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("picard max_iter must be >= 1".into()));
        }
        if !(self.ball_factor > T::one()) {
            return Err(Error::Config(format!(
                "ball_factor must be > 1, got {}",
                self.ball_factor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub iterations: usize,
    /// Last sup-over-nodes `‖u^{(n+1)} − u^{(n)}‖_{L²∩W}`.
    pub residual: T,
    pub converged: bool,
    pub ball_violation: bool,
    pub non_finite: bool,
    pub l2_norms: Vec<T>,
    pub w_norms: Vec<T>,
    /// Interval actually solved on (differs from the request after halvings).
    pub interval: T,
    pub halvings: usize,
}

impl<T: Real> SolveReport<T> {
    pub fn ok(&self) -> bool {
        self.converged && !self.ball_violation && !self.non_finite
    }
}

/// Picard iteration for the Duhamel map on `n_time` equispaced nodes of
/// `[0, T]`, starting from the free evolution.
///
/// Non-convergence is not an error: it is reported through
/// [`SolveReport::converged`], with the last iterate returned.
pub fn picard_solve<T: Real>(
    u0: &Field<T>,
    kernel: &Kernel<T>,
    cfg: &PicardConfig<T>,
) -> Result<(Trajectory<T>, SolveReport<T>)> {
    cfg.validate()?;
    let grid = u0.grid();
    grid.ensure_same(kernel.grid())?;
    let n = cfg.n_time;
    let step = cfg.t_final / T::from_usize_lossy(n - 1);
    let times: Vec<T> = (0..n).map(|m| step * T::from_usize_lossy(m)).collect();
    let spec0 = forward_raw(grid, u0.values());
    let radius = cfg.ball_factor * norm_l2_cap_w(u0);

    let evolve_to = |spec: &[Complex<T>], t: T| {
        let mut s = spec.to_vec();
        apply_free_phase(grid, &mut s, t);
        s
    };
    // Iterate 0: free evolution, spectral and physical.
    let mut specs: Vec<Vec<Complex<T>>> = times.iter().map(|&t| evolve_to(&spec0, t)).collect();
    let mut fields: Vec<Field<T>> = specs
        .iter()
        .enumerate()
        .map(|(m, s)| {
            if m == 0 {
                u0.clone()
            } else {
                Field::from_raw(grid.clone(), inverse_raw(grid, s))
            }
        })
        .collect();

    let mut report = SolveReport {
        iterations: 0,
        residual: T::infinity(),
        converged: false,
        ball_violation: false,
        non_finite: false,
        l2_norms: Vec::new(),
        w_norms: Vec::new(),
        interval: cfg.t_final,
        halvings: 0,
    };
    let half = T::lit(0.5);
    let minus_i = Complex::new(T::zero(), -T::one());

    for iter in 1..=cfg.max_iter {
        // Interaction picture: e^{+iτ|ξ|²} N̂(τ), in node order.
        let pulled: Vec<Vec<Complex<T>>> = fields
            .par_iter()
            .zip(times.par_iter())
            .map(|(u, &t)| {
                let rhs = hartree_rhs(u, kernel).expect("grids checked above");
                let mut s = forward_raw(grid, rhs.values());
                apply_free_phase(grid, &mut s, -t);
                s
            })
            .collect();

        let mut next_specs = Vec::with_capacity(n);
        let mut running = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        next_specs.push(spec0.clone());
        for m in 1..n {
            for ((r, a), b) in running.iter_mut().zip(&pulled[m - 1]).zip(&pulled[m]) {
                *r = *r + (*a + *b) * (half * step);
            }
            let mut s: Vec<Complex<T>> = spec0
                .iter()
                .zip(&running)
                .map(|(u, r)| *u + minus_i * *r)
                .collect();
            apply_free_phase(grid, &mut s, times[m]);
            next_specs.push(s);
        }

        let residual = max_of(next_specs.iter().zip(&specs).map(|(a, b)| {
            let diff: Vec<Complex<T>> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            cap_norm_spectral(grid, &diff)
        }));
        specs = next_specs;
        fields = specs
            .iter()
            .enumerate()
            .map(|(m, s)| {
                if m == 0 {
                    u0.clone()
                } else {
                    Field::from_raw(grid.clone(), inverse_raw(grid, s))
                }
            })
            .collect();
        report.iterations = iter;
        report.residual = residual;

        if !residual.is_finite() || !fields.iter().all(Field::is_finite) {
            report.non_finite = true;
            break;
        }
        if specs.iter().any(|s| cap_norm_spectral(grid, s) > radius) {
            report.ball_violation = true;
        }
        if residual <= cfg.tol {
            report.converged = true;
            break;
        }
    }

    if !report.non_finite {
        report.l2_norms = fields
            .iter()
            .map(|f| norm_lp(f, T::lit(2.0)))
            .collect::<Result<_>>()?;
        report.w_norms = fields.iter().map(norm_wiener).collect();
    }
    let trajectory = Trajectory::new(times, fields)?;
    Ok((trajectory, report))
}

/// [`picard_solve`], halving `T` after a ball violation or a failed solve,
/// at most `MAX_HALVINGS` times.
pub fn picard_solve_adaptive<T: Real>(
    u0: &Field<T>,
    kernel: &Kernel<T>,
    cfg: &PicardConfig<T>,
) -> Result<(Trajectory<T>, SolveReport<T>)> {
    const MAX_HALVINGS: usize = 10;
    let mut cfg = cfg.clone();
    let mut halvings = 0;
    loop {
        let (tr, mut report) = picard_solve(u0, kernel, &cfg)?;
        report.halvings = halvings;
        if report.ok() || halvings == MAX_HALVINGS {
            return Ok((tr, report));
        }
        cfg.t_final = cfg.t_final * T::lit(0.5);
        halvings += 1;
    }
}

/// Strang split-step stepper with a cached potential.
struct SplitStep<'a, T: Real> {
    kernel: &'a Kernel<T>,
    dt: T,
    u: Vec<Complex<T>>,
    v: Vec<T>,
}

impl<'a, T: Real> SplitStep<'a, T> {
    fn new(u0: &Field<T>, kernel: &'a Kernel<T>, dt: T) -> Result<Self> {
        let v = real_potential(u0, kernel)?;
        Ok(Self {
            kernel,
            dt,
            u: u0.values().to_vec(),
            v,
        })
    }

    fn kick(&mut self) {
        let h = self.dt * T::lit(0.5);
        for (u, &v) in self.u.iter_mut().zip(&self.v) {
            *u = *u * Complex::from_polar(T::one(), -h * v);
        }
    }

    fn step(&mut self) -> Result<()> {
        let grid = self.kernel.grid();
        self.kick();
        let mut s = forward_raw(grid, &self.u);
        apply_free_phase(grid, &mut s, self.dt);
        self.u = inverse_raw(grid, &s);
        let field = Field::from_raw(grid.clone(), std::mem::take(&mut self.u));
        if !field.is_finite() {
            return Err(Error::InvalidField(
                "split-step produced non-finite values".into(),
            ));
        }
        // The phase kicks leave |u| unchanged, so this potential also serves
        // the first half-kick of the next step.
        self.v = real_potential(&field, self.kernel)?;
        self.u = field.into_values();
        self.kick();
        Ok(())
    }

    fn field(&self) -> Field<T> {
        Field::from_raw(self.kernel.grid().clone(), self.u.clone())
    }
}

fn real_potential<T: Real>(u: &Field<T>, kernel: &Kernel<T>) -> Result<Vec<T>> {
    if kernel.is_zero() {
        return Ok(vec![T::zero(); u.grid().len()]);
    }
    let v = potential(u, kernel)?;
    let max_imag = max_of(v.iter().map(|c| c.im.abs()));
    let max_abs = max_of(v.iter().map(|c| c.norm()));
    if max_imag > T::lit(1e-10) * max_abs.max(T::one()) {
        return Err(Error::NonRealPotential {
            max_imag: max_imag.as_f64(),
            max_abs: max_abs.as_f64(),
        });
    }
    Ok(v.into_iter().map(|c| c.re).collect())
}

/// Number of steps of size close to `dt` covering `[0, T]` exactly.
fn step_count<T: Real>(t_final: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) || !(t_final >= dt) || !t_final.is_finite() {
        return Err(Error::Domain(format!(
            "split-step needs 0 < dt <= T, got dt={dt}, T={t_final}"
        )));
    }
    let ratio = (t_final / dt).as_f64();
    Ok(((ratio - 1e-9).ceil() as usize).max(1))
}

/// Strang splitting over `[0, T]`, every step recorded.
pub fn splitstep_solve<T: Real>(
    u0: &Field<T>,
    kernel: &Kernel<T>,
    t_final: T,
    dt: T,
) -> Result<Trajectory<T>> {
    splitstep_solve_sampled(u0, kernel, t_final, dt, 1)
}

/// Strang splitting recording every `every`-th step (and the final one).
pub fn splitstep_solve_sampled<T: Real>(
    u0: &Field<T>,
    kernel: &Kernel<T>,
    t_final: T,
    dt: T,
    every: usize,
) -> Result<Trajectory<T>> {
    u0.grid().ensure_same(kernel.grid())?;
    if every == 0 {
        return Err(Error::Domain("sampling stride must be >= 1".into()));
    }
    let steps = step_count(t_final, dt)?;
    let dt = t_final / T::from_usize_lossy(steps);
    let recorded = |s: usize| s.is_multiple_of(every) || s == steps;
    if kernel.is_zero() {
        // V ≡ 0: the splitting is the free flow, applied in one step per sample.
        let grid = u0.grid();
        let spec0 = forward_raw(grid, u0.values());
        let mut times = vec![T::zero()];
        let mut fields = vec![u0.clone()];
        for s in (1..=steps).filter(|&s| recorded(s)) {
            let t = dt * T::from_usize_lossy(s);
            let mut spec = spec0.clone();
            apply_free_phase(grid, &mut spec, t);
            times.push(t);
            fields.push(Field::from_raw(grid.clone(), inverse_raw(grid, &spec)));
        }
        return Trajectory::new(times, fields);
    }
    let mut stepper = SplitStep::new(u0, kernel, dt)?;
    let mut times = vec![T::zero()];
    let mut fields = vec![u0.clone()];
    for s in 1..=steps {
        stepper.step()?;
        if recorded(s) {
            times.push(dt * T::from_usize_lossy(s));
            fields.push(stepper.field());
        }
    }
    Trajectory::new(times, fields)
}

/// L² drift and Wiener profile of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationRecord<T> {
    /// `max_m |‖u(t_m)‖₂ − ‖u(t₀)‖₂| / ‖u(t₀)‖₂` (absolute if `u(t₀) = 0`).
    pub l2_drift: T,
    pub w_max: T,
    /// `ω(t_m) = max_{j≤m} ‖u(t_j)‖_W`.
    pub w_profile: Vec<T>,
    pub w_values: Vec<T>,
}

pub fn conservation_monitor<T: Real>(tr: &Trajectory<T>) -> ConservationRecord<T> {
    let l2: Vec<T> = tr
        .fields()
        .iter()
        .map(|f| norm_lp(f, T::lit(2.0)).expect("p = 2 is valid"))
        .collect();
    let base = l2[0];
    let scale = if base > T::zero() { base } else { T::one() };
    let l2_drift = max_of(l2.iter().map(|&v| (v - base).abs() / scale));
    let w_values: Vec<T> = tr.fields().iter().map(norm_wiener).collect();
    let mut running = T::zero();
    let w_profile = w_values
        .iter()
        .map(|&w| {
            running = running.max(w);
            running
        })
        .collect();
    ConservationRecord {
        l2_drift,
        w_max: running,
        w_profile,
        w_values,
    }
}

/// `‖R(f) − R(g)‖ / ((‖f‖² + ‖g‖²)‖f − g‖)` in `L²∩W`, `R = (K∗|·|²)·`.
/// The trilinear estimate bounds this by a constant independent of `f, g`.
pub fn lipschitz_ratio<T: Real>(f: &Field<T>, g: &Field<T>, kernel: &Kernel<T>) -> Result<T> {
    let diff = f.sub(g)?;
    let den_diff = norm_l2_cap_w(&diff);
    if den_diff == T::zero() {
        return Err(Error::Domain("f and g coincide".into()));
    }
    let num = norm_l2_cap_w(&hartree_rhs(f, kernel)?.sub(&hartree_rhs(g, kernel)?)?);
    let nf = norm_l2_cap_w(f);
    let ng = norm_l2_cap_w(g);
    Ok(num / ((nf * nf + ng * ng) * den_diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{materialize, materialize_with_policy, KernelSpec, ZeroModePolicy};
    use crate::propagator::free_evolve;

    fn grid(n: usize, l: f64) -> Grid<f64> {
        Grid::new(1, n, l).unwrap()
    }

    fn max_diff(a: &Field<f64>, b: &Field<f64>) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn delta_kernel_gives_cubic_nls() {
        let g = grid(256, 30.0);
        let u = Field::from_fn(g.clone(), |x| {
            Complex::new(
                (-x[0] * x[0] / 2.0).exp(),
                0.3 * (-(x[0] - 1.0).powi(2)).exp(),
            )
        })
        .unwrap();
        let k = materialize(&KernelSpec::Delta, &g).unwrap();
        let rhs = hartree_rhs(&u, &k).unwrap();
        for (r, v) in rhs.values().iter().zip(u.values()) {
            assert!((r - v * v.norm_sqr()).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_field_rhs() {
        let g = grid(64, 10.0);
        let k = materialize(&KernelSpec::homogeneous(1.0, 0.4), &g).unwrap();
        let rhs = hartree_rhs(&Field::zeros(g), &k).unwrap();
        assert!(rhs.values().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let k = materialize(&KernelSpec::Delta, &grid(64, 10.0)).unwrap();
        let u = Field::gaussian(grid(64, 12.0), 1.0).unwrap();
        assert!(matches!(hartree_rhs(&u, &k), Err(Error::GridMismatch(_))));
    }

    /// Direct periodic convolution with the kernel's own spatial samples,
    /// computed as the inverse DFT of the multiplier by explicit sums.
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn homogeneous_potential_matches_direct_sum() {
        let n = 64;
        let g = grid(n, 16.0);
        let k = materialize(&KernelSpec::homogeneous(1.0, 0.4), &g).unwrap();
        let u = Field::gaussian(g.clone(), 1.0).unwrap();
        let dx = g.dx();
        let dxi = g.dxi();
        // K(x_j) = (2π)^{-1/2} Σ_k K̂(ξ_k) e^{iξ_k x_j} dξ on the lattice of differences
        let kernel_at = |j: i64| {
            let x = j as f64 * dx;
            let mut acc = 0.0;
            for (i, &m) in k.multiplier().iter().enumerate() {
                let xi = g.wavenumber(i) as f64 * dxi;
                acc += m * (xi * x).cos();
            }
            acc * dxi / (2.0 * std::f64::consts::PI).sqrt()
        };
        let kvals: Vec<f64> = (0..n as i64).map(kernel_at).collect();
        let rho: Vec<f64> = u.values().iter().map(|c| c.norm_sqr()).collect();
        let v = potential(&u, &k).unwrap();
        for i in 0..n {
            let mut direct = 0.0;
            for j in 0..n {
                let lag = (i as i64 - j as i64).rem_euclid(n as i64);
                direct += kvals[lag as usize] * rho[j] * dx;
            }
            assert!(
                (v[i].re - direct).abs() < 1e-10,
                "i={i}: {} vs {direct}",
                v[i].re
            );
            assert!(v[i].im.abs() < 1e-12);
        }
        // λ > 0, zero mean kernel: potential peaks at the bump and falls off radially
        let center = n / 2;
        assert!(v[center].re > 0.0);
        for i in center..n - 1 {
            assert!(v[i + 1].re <= v[i].re + 1e-14);
        }
        for i in 1..=center {
            assert!(v[i - 1].re <= v[i].re + 1e-14);
        }
        let rhs = hartree_rhs(&u, &k).unwrap();
        for (r, (uu, vv)) in rhs.values().iter().zip(u.values().iter().zip(&v)) {
            assert!((r - uu * vv.re).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_kernel_picard_is_free_flow_bitwise() {
        let g = grid(256, 30.0);
        let u0 = Field::gaussian(g.clone(), 1.0).unwrap();
        let k = materialize(&KernelSpec::homogeneous(0.0, 0.4), &g).unwrap();
        let (tr, report) = picard_solve(&u0, &k, &PicardConfig::new(0.5)).unwrap();
        assert!(report.converged && report.iterations == 1 && report.residual == 0.0);
        for (t, f) in tr.iter() {
            assert_eq!(f, &free_evolve(&u0, t));
        }
    }

    fn hartree_setup() -> (Field<f64>, Kernel<f64>) {
        let g = grid(1024, 40.0);
        let u0 = Field::gaussian(g.clone(), 1.0).unwrap();
        let k = materialize(&KernelSpec::homogeneous(1.0, 0.4), &g).unwrap();
        (u0, k)
    }

    #[test]
    fn picard_short_time_converges() {
        let (u0, k) = hartree_setup();
        let (tr, report) = picard_solve(&u0, &k, &PicardConfig::new(0.05)).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.iterations <= 8, "iterations = {}", report.iterations);
        assert!(report.residual <= 1e-10);
        assert!(!report.ball_violation);
        let rec = conservation_monitor(&tr);
        assert!(rec.l2_drift <= 1e-9, "drift {}", rec.l2_drift);
    }

    #[test]
    fn picard_long_time_is_flagged() {
        let (u0, k) = hartree_setup();
        let mut cfg = PicardConfig::new(50.0);
        cfg.max_iter = 30;
        let (_, report) = picard_solve(&u0, &k, &cfg).unwrap();
        assert!(!report.ok());
        assert!(report.ball_violation || !report.converged);
    }

    #[test]
    fn adaptive_picard_halves_until_admissible() {
        let (u0, k) = hartree_setup();
        let mut cfg = PicardConfig::new(50.0);
        cfg.max_iter = 30;
        let (_, report) = picard_solve_adaptive(&u0, &k, &cfg).unwrap();
        assert!(report.ok(), "{report:?}");
        assert!(report.halvings >= 1);
        assert_eq!(report.interval, 50.0 / 2f64.powi(report.halvings as i32));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PicardConfig::new(1.0);
        cfg.n_time = 4;
        assert!(cfg.validate().is_err());
        assert!(PicardConfig::new(0.0).validate().is_err());
        let mut cfg = PicardConfig::new(1.0);
        cfg.max_iter = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_kernel_splitstep_is_free_flow() {
        let g = grid(256, 30.0);
        let u0 = Field::gaussian(g.clone(), 1.0).unwrap();
        let k = materialize(&KernelSpec::homogeneous(0.0, 0.4), &g).unwrap();
        let tr = splitstep_solve(&u0, &k, 0.5, 0.01).unwrap();
        let (&t, last) = tr.last();
        assert!(max_diff(last, &free_evolve(&u0, t)) < 1e-12);
    }

    /// Cubic NLS `iu_t + u_xx = |u|²u` by a split-step written directly on
    /// rustfft with its own wavenumbers and normalization.
    fn reference_cubic_nls(u0: &[Complex<f64>], l: f64, t: f64, dt: f64) -> Vec<Complex<f64>> {
        use rustfft::FftPlanner;
        let n = u0.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < n / 2 {
                    i as f64
                } else {
                    i as f64 - n as f64
                };
                2.0 * std::f64::consts::PI * m / l
            })
            .collect();
        let mut u = u0.to_vec();
        let steps = (t / dt).round() as usize;
        for _ in 0..steps {
            for z in u.iter_mut() {
                *z *= Complex::from_polar(1.0, -0.5 * dt * z.norm_sqr());
            }
            fwd.process(&mut u);
            for (z, kk) in u.iter_mut().zip(&k) {
                *z *= Complex::from_polar(1.0 / n as f64, -dt * kk * kk);
            }
            inv.process(&mut u);
            for z in u.iter_mut() {
                *z *= Complex::from_polar(1.0, -0.5 * dt * z.norm_sqr());
            }
        }
        u
    }

    #[test]
    fn delta_splitstep_matches_independent_cubic_nls() {
        let l = 40.0;
        let g = grid(512, l);
        let u0 = Field::gaussian(g.clone(), 1.0).unwrap();
        let k = materialize(&KernelSpec::Delta, &g).unwrap();
        let tr = splitstep_solve_sampled(&u0, &k, 1.0, 1e-3, 1000).unwrap();
        let ours = tr.last().1;
        let reference = reference_cubic_nls(u0.values(), l, 1.0, 1e-3);
        let diff = Field::new(g, reference).unwrap().sub(ours).unwrap();
        let err = norm_lp(&diff, 2.0).unwrap();
        assert!(err < 1e-8, "L² difference {err:e}");
    }

    #[test]
    fn splitstep_is_second_order() {
        let (u0, k) = hartree_setup();
        let t = 0.5;
        let base = 0.02;
        let reference = splitstep_solve_sampled(&u0, &k, t, base / 16.0 / 8.0, 1 << 20)
            .unwrap()
            .last()
            .1
            .clone();
        let mut logs = Vec::new();
        for level in 0..4 {
            let dt = base / f64::from(1 << level);
            let tr = splitstep_solve_sampled(&u0, &k, t, dt, 1 << 20).unwrap();
            let err = norm_lp(&tr.last().1.sub(&reference).unwrap(), 2.0).unwrap();
            logs.push((dt.ln(), err.ln()));
        }
        let slope = crate::picard_lab::least_squares_slope(&logs).unwrap().slope;
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn splitstep_conserves_l2() {
        let (u0, _) = hartree_setup();
        let k = materialize(&KernelSpec::homogeneous(-1.0, 0.4), u0.grid()).unwrap();
        let tr = splitstep_solve_sampled(&u0, &k, 1.0, 1e-3, 50).unwrap();
        assert!(conservation_monitor(&tr).l2_drift < 1e-10);
    }

    #[test]
    fn free_trajectory_monitor() {
        let (u0, _) = hartree_setup();
        let tr = crate::propagator::free_trajectory(&u0, 3.0, 16).unwrap();
        let rec = conservation_monitor(&tr);
        assert!(rec.l2_drift <= 1e-12);
        let w0 = rec.w_values[0];
        assert!(rec.w_profile.iter().all(|w| (w - w0).abs() < 1e-12 * w0));
    }

    #[test]
    fn zero_mode_is_a_global_phase() {
        let (u0, _) = hartree_setup();
        let g = u0.grid().clone();
        let spec = KernelSpec::homogeneous(1.0, 0.4);
        let k0 = materialize_with_policy(&spec, &g, ZeroModePolicy::Zero).unwrap();
        let kc = materialize_with_policy(&spec, &g, ZeroModePolicy::Value(3.0)).unwrap();
        let a = splitstep_solve_sampled(&u0, &k0, 1.0, 1e-3, 250).unwrap();
        let b = splitstep_solve_sampled(&u0, &kc, 1.0, 1e-3, 250).unwrap();
        for (fa, fb) in a.fields().iter().zip(b.fields()) {
            for (x, y) in fa.values().iter().zip(fb.values()) {
                assert!((x.norm() - y.norm()).abs() < 1e-8);
            }
        }
        let (pa, _) = picard_solve(&u0, &k0, &PicardConfig::new(0.05)).unwrap();
        let (pb, _) = picard_solve(&u0, &kc, &PicardConfig::new(0.05)).unwrap();
        for (fa, fb) in pa.fields().iter().zip(pb.fields()) {
            for (x, y) in fa.values().iter().zip(fb.values()) {
                assert!((x.norm() - y.norm()).abs() < 1e-8);
            }
        }
    }

    fn sup_cap_discrepancy(a: &Trajectory<f64>, b: &Trajectory<f64>) -> f64 {
        a.fields()
            .iter()
            .zip(b.fields())
            .map(|(x, y)| norm_l2_cap_w(&x.sub(y).unwrap()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn picard_agrees_with_splitstep() {
        let (u0, k) = hartree_setup();
        let cfg = PicardConfig::new(0.05);
        let (pt, report) = picard_solve(&u0, &k, &cfg).unwrap();
        assert!(report.ok());
        // split-step at dt = node spacing / 8
        let node = 0.05 / (cfg.n_time - 1) as f64;
        let st = splitstep_solve_sampled(&u0, &k, 0.05, node / 8.0, 8).unwrap();
        assert_eq!(st.len(), pt.len());
        let d = sup_cap_discrepancy(&pt, &st);
        assert!(d <= 1e-4, "discrepancy {d:e}");
    }

    #[test]
    fn continuation_matches_single_run() {
        let (u0, k) = hartree_setup();
        let cfg = PicardConfig::new(0.05);
        let (first, r1) = picard_solve(&u0, &k, &cfg).unwrap();
        let mid = first.last().1.clone();
        let (second, r2) = picard_solve(&mid, &k, &cfg).unwrap();
        assert!(r1.ok() && r2.ok());
        let node = 0.05 / (cfg.n_time - 1) as f64;
        let whole = splitstep_solve_sampled(&u0, &k, 0.1, node / 8.0, 8).unwrap();
        let reference = &whole.fields()[whole.len() - 1];
        let d = norm_l2_cap_w(&second.last().1.sub(reference).unwrap());
        assert!(d <= 2e-4, "continuation mismatch {d:e}");
    }

    #[test]
    fn trilinear_constant_is_stable_under_refinement() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let l = 20.0;
        let spec = KernelSpec::homogeneous(1.0, 0.4);
        // band-limited trigonometric polynomials, |k| ≤ 6 modes of the box
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut coeffs = Vec::new();
        for _ in 0..20 {
            let pick = |rng: &mut ChaCha8Rng| -> Vec<Complex<f64>> {
                (0..13)
                    .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            };
            coeffs.push((pick(&mut rng), pick(&mut rng)));
        }
        let worst = |n: usize| {
            let g = grid(n, l);
            let k = materialize(&spec, &g).unwrap();
            let make = |c: &[Complex<f64>]| {
                Field::from_fn(g.clone(), |x| {
                    c.iter()
                        .enumerate()
                        .map(|(j, &a)| {
                            let m = j as f64 - 6.0;
                            a * Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * m * x[0] / l)
                        })
                        .sum()
                })
                .unwrap()
            };
            coeffs
                .iter()
                .map(|(a, b)| lipschitz_ratio(&make(a), &make(b), &k).unwrap())
                .fold(0.0, f64::max)
        };
        let coarse = worst(64);
        let fine = worst(128);
        assert!(coarse.is_finite() && coarse > 0.0);
        assert!((coarse / fine - 1.0).abs() < 1e-2, "{coarse} vs {fine}");
    }
}
