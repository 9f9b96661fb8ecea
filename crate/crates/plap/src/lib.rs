//! Simulation library for stochastic local and nonlocal singular p-Laplace
//! equations (p ∈ [1,2]) with additive trace-class noise on the unit
//! interval, plus the ergodic statistics used by the experiment CLI:
//! L^m energy cascades, C/t decay of the noise-free flow, pathwise L^m
//! contraction under shared noise, Cesàro time averages and empirical
//! invariant measures, bounded-Lipschitz distances between them, and the
//! nonlocal→local limit under kernel rescaling.
//!
//! Layout:
//! - [`field`]: grids, mean-zero fields, norms, pairings, (de)serialization
//! - [`kernel`]: compact-support kernels J, ε-rescaled banded stencils
//! - [`proximal`]: ψ = |·|^p/p, Moreau–Yosida envelope and regularized flux
//! - [`operators`]: nonlocal and local drifts and their energies
//! - [`noise`]: spectral trace-class Wiener process, counter-based RNG
//! - [`integrator`]: explicit / semi-implicit Euler–Maruyama stepping
//! - [`ergodic`]: invariant-measure estimation and coupling diagnostics
//! - [`harness`]: experiment configs, reports and the headline experiments

mod banded;
pub mod error;
pub mod field;
pub mod kernel;
pub mod parallel;
pub mod proximal;
pub mod quad;

pub mod ergodic;
pub mod integrator;
pub mod noise;
pub mod operators;

pub use error::{Error, Result};
pub use field::{Field, Grid};
