//! Pseudo-spectral toolkit for the Hartree equation
//!
//! ```text
//! i ∂ₜu + Δu = (K ∗ |u|²) u,   x ∈ ℝᵈ
//! ```
//!
//! The crate discretizes ℝᵈ by a periodic box and provides:
//!
//! - physical ↔ spectral transforms under the unitary convention
//!   `û(ξ) = (2π)^{-d/2} ∫ e^{-ix·ξ} u(x) dx` ([`grid`]),
//! - Hartree kernels as spectral multipliers ([`kernels`]),
//! - Lebesgue, Wiener (`‖û‖_{L¹}`) and mixed space–time norms ([`norms`]),
//! - the free Schrödinger group ([`propagator`]),
//! - a Duhamel/Picard fixed-point solver and a Strang split-step
//!   reference integrator ([`dynamics`]),
//! - the second Picard iterate and norm-inflation experiments under the
//!   scaling `f^h(x) = f(hx)` ([`picard_lab`]),
//! - configuration-driven experiments, reports and the HWF1 field format
//!   ([`runner`], [`io`]).
//!
//! All numerical types are generic over the scalar type (`f32` or `f64`,
//! see [`Real`]); the aliases at the crate root fix `f64`, which is what the
//! experiments and the command-line tool use.

// `!(x > y)` is the NaN-rejecting form used for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod norms;
pub mod picard_lab;
pub mod propagator;
pub mod runner;
pub mod scalar;
pub mod special;
mod sum;

pub use error::{Error, Result};
pub use grid::{boundary_mass_fraction, forward, inverse};
pub use scalar::Real;

pub use num_complex::Complex;

pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::Field<f64>;
pub type SpectralField64 = grid::SpectralField<f64>;
pub type Kernel64 = kernels::Kernel<f64>;
pub type KernelSpec64 = kernels::KernelSpec<f64>;
pub type Trajectory64 = norms::Trajectory<f64>;
pub type PicardConfig64 = dynamics::PicardConfig<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type Field32 = grid::Field<f32>;
pub type SpectralField32 = grid::SpectralField<f32>;
