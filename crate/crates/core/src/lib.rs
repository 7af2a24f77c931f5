//! Simulation and reconstruction for two-mode, two-photon linear optics.
//!
//! Two frequency-degenerate photons (signal and idler) sharing two spatial
//! modes live in a four-dimensional "two-color" space; every linear-optical
//! element acts identically on both colors, so the dynamics close on the
//! three-dimensional symmetric subspace, which is a spin-1 system.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: states, density matrices, Hermitian operators, eigenvalues.
//! * [`optics`]: phase shifters, beamsplitters, MZIs and analyzer settings.
//! * [`spin`]: spin-1 operators, measurement directions, operator basis.
//! * [`source`]: NOON and contaminated pair-source states, mixture noise.
//! * [`tomography`]: linear inversion and maximum-likelihood reconstruction.
//! * [`fringe`]: fringe simulation, Poisson synthesis and visibility fitting.
//! * [`replicate`]: the reference-data acceptance checks.

// `!(x <= tol)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
pub mod fock;
pub mod fringe;
pub mod optics;
pub mod optim;
pub mod replicate;
pub mod rng;
pub mod source;
pub mod spin;
pub mod tomography;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, HermitianOperator, PureState, C64};
pub use spin::SpinDirection;
