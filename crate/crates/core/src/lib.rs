//! Steady two-dimensional water waves over periodic bottoms.
//!
//! The crate evaluates a Hamiltonian for the surface elevation `η` and
//! surface potential `ξ` in a uniform stream of speed `c` over a bottom
//! `y = −h + b(x)`, and locates its critical points: the continued trivial
//! solution, flat-bottom Stokes branches, and the waves that persist when a
//! small bottom is switched on.

pub mod bottom_current;
pub mod continuation;
pub mod dirichlet_neumann;
pub mod error;
pub mod fft;
pub mod fourier;
pub mod hamiltonian;
pub mod linalg;
pub mod persistence;

pub use error::{Error, ErrorClass, Result};
pub use fourier::{integrate, PeriodicField, SpectralConfig, State};
