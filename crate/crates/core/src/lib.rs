//! Exact event-driven simulation of a stochastic spatial host-symbiont model.
//!
//! Every lattice site holds a host of type `1..=kappa`, either unassociated or carrying a
//! symbiont of type `1..=kappa`. Hosts reproduce onto neighboring sites as in a voter
//! model, with associated hosts reproducing at `g` times the base rate; symbionts spread
//! onto unassociated neighbors. Alongside the simulator the crate ships
//!
//! - the mean-field ODE system with its closed-form equilibrium and stability analysis,
//! - reference processes (biased voter, contact process, half-space oriented
//!   percolation) used as oracles,
//! - observables, file formats, and a reproducible experiment runner.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lattice;
pub mod meanfield;
pub mod observables;
pub mod reference;
pub mod rng;
pub mod stats;
mod sumtree;

pub use dynamics::{ModelParams, Simulator};
pub use error::{Error, Result};
pub use lattice::{Configuration, Geometry, SiteState};
pub use sumtree::SumTree;
