//! Numerical laboratory for long-range hopping lattice operators
//! `H = T_a + V + b` on `l^2(Z)` with a uniform electric field `V(n) = n`
//! (or a Maryland potential) and a bounded perturbation `b`.
//!
//! The pipeline is: build a [`kernel::HoppingKernel`], assemble a
//! [`operator::TruncatedOperator`] on `{-N, ..., N}`, diagonalize it into
//! [`spectral::SpectralData`], then run the static checks in [`localization`]
//! and the wave-packet checks in [`dynamics`]. [`experiment`] drives whole runs
//! from a config file.

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod kernel;
pub mod localization;
pub mod operator;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kernel::{build_kernel, HoppingKernel, KernelFamily, KernelNorm, KernelParams, Support};
pub use operator::{build_operator, OnSiteField, Perturbation, PotentialSpec, TruncatedOperator};
pub use spectral::{diagonalize, diagonalize_with, SpectralData, SpectralOptions};
