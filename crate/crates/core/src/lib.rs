//! Deterministic, time-slotted simulator of millimeter-wave vehicle-to-vehicle
//! links on a multi-lane highway.
//!
//! The crate is organised by subsystem:
//!
//! - [`geometry`]: highway scenario, vehicle motion, blockage and neighbourhood queries.
//! - [`radio`]: pathloss, sectored antenna gains, alignment delay, SINR and rate.
//! - [`queue`]: per-transmitter packet queues with deadline-based dropping.
//! - [`association`]: link exploration, learned utilities, deferred acceptance and
//!   the distance-based / asynchronous baselines.
//! - [`pso`]: particle swarm beamwidth allocation.
//! - [`sim`]: the two-timescale slot loop.
//! - [`metrics`]: CDFs, joint-bound tables and file exports.
//! - [`config`]: the resolved run configuration and its static checks.

pub mod association;
pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pso;
pub mod queue;
pub mod radio;
pub mod rng;
pub mod sim;
pub mod units;

pub use config::{Method, SimConfig};
pub use error::{Error, Result};
pub use metrics::MetricsBundle;
pub use sim::run;
