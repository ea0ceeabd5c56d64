//! Asymptotic-preserving IMEX and IMEX-S solvers for the multiscale linear
//! kinetic transport equation
//!
//! ```text
//! f_t + (1/eps) Omega . grad f = (sigma_s / eps^2)(<f> - f) - sigma_a f + Phi
//! ```
//!
//! on periodic 1D/2D staggered grids with discrete ordinates, using the
//! macro-micro split `f = rho + eps g`. The fluctuation `g` is evolved either
//! densely or as energy-consistent low-rank factors (BUG, augmented BUG and
//! its diffusion-limit enriched variant).
//!
//! Start from [`scenarios::Scenario`] for the built-in experiments, or
//! assemble a [`stepper::Stepper`] from a [`ops::PhaseSpace`] and a
//! [`material::MaterialField`] directly.

pub mod angular;
pub mod diagnostics;
pub mod error;
pub mod fullrank;
pub mod grid;
pub mod linsolve;
pub mod lowrank;
pub mod material;
pub mod ops;
pub mod runner;
pub mod scenarios;
pub mod stepper;

pub use error::{Error, Result};
pub use stepper::{MicroState, Scheme, Stepper};
