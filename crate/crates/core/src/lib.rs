//! Genealogy of a critical continuous-time binary branching process.
//!
//! Individuals live an Exponential(1) lifetime and give birth at Poisson(1)
//! times. This crate samples the family tree (truncated at an observation
//! level `t`, optionally conditioned on `n` extant individuals), converts it to
//! and from its contour process, extracts the genealogical and the p-sampled
//! historical point-processes, and samples their Brownian-excursion limits
//! directly from their Poisson laws.
//!
//! The crate is `no_std` (it needs `alloc`). All randomness is taken from an
//! explicit [`rand::Rng`] argument; nothing here keeps global state.
//!
//! Modules:
//! - [`tree`]: planar binary trees with edge lengths and the branching simulator.
//! - [`contour`]: the tree/contour bijection, the alternating-exponential
//!   contour sampler, level crossings and infimum decompositions.
//! - [`genealogy`]: genealogical and historical point-processes of conditioned trees.
//! - [`laws`]: closed-form densities, distribution functions and intensities.
//! - [`continuum`]: samplers for the continuum limits.

#![no_std]

extern crate alloc;

pub mod continuum;
pub mod contour;
pub mod draw;
mod error;
pub mod genealogy;
pub mod laws;
mod math;
pub mod tree;

pub use error::{Error, Result};

/// Absolute tolerance used whenever two depths (or a depth and the horizon)
/// are compared.
pub const DEPTH_TOL: f64 = 1e-9;
