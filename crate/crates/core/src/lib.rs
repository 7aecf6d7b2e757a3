//! Semiclassical Bloch-wavepacket dynamics for the two-scale Schrödinger equation
//!
//! ```text
//! iε ∂ₜψ = −½ε² Δψ + V(x/ε) ψ + W(x) ψ
//! ```
//!
//! with `V` periodic on a Bravais lattice and `W` a smooth external potential.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It provides
//!
//! * [`lattice`] and [`potential`]: lattice geometry, Brillouin-zone folding and the two potentials,
//! * [`bands`]: plane-wave Bloch eigenpairs, band derivatives and Berry geometry,
//! * [`envelope`]: Gaussian and grid envelopes and their split-step evolution,
//! * [`particle_field`]: the classical flow and the ε-corrected particle–field system,
//! * [`direct`]: a split-step solver for the full equation and the asymptotic reconstruction,
//! * [`observables`]: wavepacket observables and two-scale averaging.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bands;
pub mod direct;
pub mod envelope;
mod error;
pub mod fft;
pub mod grid;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod ode;
pub mod particle_field;
pub mod potential;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
