//! Simulation library for federated learning over LEO satellite
//! constellations with high-altitude-platform parameter servers.
//!
//! Modules, bottom-up:
//! - [`constellation`]: Walker-delta geometry, propagation, visibility.
//! - [`channel`]: link budget, shadowed-Rician and Nakagami statistics.
//! - [`noma`]: SIC rates, outage probability, BER, OMA timing.
//! - [`fl`]: datasets, logistic model, local SGD, FedAvg and chain aggregation.
//! - [`protocol`]: the discrete-event engine running the propagation and
//!   aggregation algorithms.
//! - [`analysis`]: convergence-bound constants, lemma checks, curve output.
//! - [`scenario`]: configuration files and the subcommand back ends.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod fl;
pub mod geometry;
pub mod noma;
pub mod protocol;
pub mod scenario;
pub mod seed;
pub mod units;

pub use constellation::{Constellation, GroundNode, NodeKind, OrbitId, SatelliteId, ShellSpec};
pub use error::{Error, Result};
