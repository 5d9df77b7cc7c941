//! Killed random walks among Bernoulli obstacles on `Z^d`.
//!
//! The crate is organized around a small set of lattice primitives
//! ([`lattice`]), quenched obstacle environments ([`env`], [`cluster`]),
//! exact killed-walk dynamics ([`walk`]), Dirichlet eigenproblems on lattice
//! domains ([`spectral`]), continuum ball references ([`continuum`],
//! [`bessel`], [`quad`]), coarse-grained localization detection
//! ([`localize`]) and obstacle-surgery experiments with the supporting
//! potential theory ([`surgery`]).

pub mod bessel;
pub mod cluster;
pub mod continuum;
pub mod domain;
pub mod env;
pub mod error;
pub mod lattice;
pub mod localize;
pub mod quad;
pub mod spectral;
pub mod surgery;
pub mod walk;

pub use error::{Error, Result};
