//! Multi-particle diffusion limited aggregation (MDLA) on the rescaled
//! lattice Z^d/n, with the tools used to study its scaling limit: the bond
//! exclusion engine, cascade attachment, winding numbers of planar paths, a
//! one-dimensional Stefan solver and growth/chaos diagnostics.

pub mod aggregate;
pub mod analysis;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod mdla;
pub mod output;
pub mod particles;
pub mod rng;
pub mod sitemap;
pub mod stefan;
pub mod winding;

pub use error::{Error, Result};
