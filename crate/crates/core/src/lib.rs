//! Artificial magnetic fields for photons in optomechanical lattices.
//!
//! The crate covers both ways of imprinting Peierls phases on photon
//! hopping with the optomechanical interaction:
//!
//! * the **modulated-link** scheme, where driven mechanical modes modulate
//!   interface optical modes and tunnelling photons are up-converted
//!   ([`floquet`], [`pert`]);
//! * the **wavelength-conversion** scheme, where photon-phonon-photon
//!   conversion along each row carries the phase of the drive laser
//!   ([`response`]).
//!
//! Both are validated against the ideal Peierls hopping model in
//! [`hofstadter`]. Geometry and gauge data live in [`lattice`]; derived
//! metrics and design estimates in [`analysis`]; experiment orchestration
//! behind the `optomag` binary in [`config`] and [`run`].
//!
//! Units: ħ = 1, the mechanical frequency Ω₀ = 1 and the optical lattice
//! constant a = 1. All rates and frequencies are dimensionless.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod floquet;
pub mod hofstadter;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod pert;
pub mod response;
pub mod run;

pub use error::{Error, Result};
pub use num_complex::Complex64;
