//! Butterfly velocity of the one-dimensional anisotropic XY chain, measured two ways.
//!
//! The [`analytic`] module evaluates the free-fermion quasiparticle dispersion and takes the
//! butterfly velocity as the largest group velocity. The quantum route compiles `exp(-iHt)`
//! into a brick-wall circuit ([`rtr`]), runs the teleportation-based OTOC protocol on a
//! statevector simulator ([`sim`], [`yky`]) and fits the light-cone front of the squared
//! commutator ([`butterfly`]).
//!
//! The crate is `no_std` and only needs an allocator. File formats, parallel orchestration
//! and the command-line front end live in the companion `xy-butterfly-lab` crate.
//!
//! Site and qubit convention used throughout: site 1 of an `n`-site chain is the most
//! significant bit of the `2^n`-dimensional basis index.
#![no_std]
// Modules import `num_traits::Float` for float math. When std is in the build graph (tests,
// dev-dependencies) its inherent methods win and the import is reported unused.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod butterfly;
mod error;
pub mod linalg;
pub mod model;
pub mod rtr;
pub mod sim;
pub mod yky;

pub use error::{Error, Result};
pub use linalg::C64;
