//! Uplink coverage of a two-cell network: a terrestrial base station (TBS)
//! at the center of a disk-shaped network region and a drone aerial base
//! station (ABS) hovering above a stadium inside that region.
//!
//! The crate provides two independent engines for the TBS and ABS uplink
//! coverage probabilities:
//!
//! * [`analytic`] evaluates the Laplace-transform based closed forms by
//!   adaptive Gauss–Kronrod quadrature;
//! * [`montecarlo`] simulates user drops, fading and (optionally) the
//!   air-to-ground LOS/NLOS channel.
//!
//! [`experiments`] drives parameter sweeps, optimal-height search and the
//! TBS-constrained feasibility curve on top of both engines.

pub mod analytic;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod quadrature;
pub mod report;
pub mod stats;

pub use analytic::{coverage_abs, coverage_tbs, LaplaceEval};
pub use config::{PowerControlBoundaries, Regime, Scenario, ScenarioConfig};
pub use error::{Error, Result};
pub use montecarlo::{simulate_coverage, AerialModel, SimEstimate, SimSettings};
pub use quadrature::QuadratureSettings;
