//! Simulation engine for a spatial public goods game in which every round
//! runs a first-come-first-served single-server queue. Each player's sojourn
//! time through the queue scales its contribution to the groups it plays in,
//! so service congestion translates directly into payoff heterogeneity.
//! Strategy updates follow the Fermi rule, optionally biased toward
//! high-reputation neighbors.
//!
//! The crate also ships closed-form finite-capacity M/M/1 analytics used to
//! cross-check the simulated queue, plus experiment orchestration (replicate
//! batches, parameter sweeps, deterministic file emission).

pub mod analytics;
pub mod config;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod output;
pub mod payoff;
pub mod queueing;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
