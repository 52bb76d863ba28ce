//! Deterministic conflict-management engine and encounter simulator for
//! mixed manned/unmanned airspace.
//!
//! The library is organised as a pipeline: electronic-conspicuity (EC)
//! datagrams are parsed and latency-compensated ([`ec_ingest`]), tracked
//! flights are banded into regions of interest around the host drone
//! ([`airspace_filter`]), positions are smoothed with a discrete Kalman
//! filter ([`state_estimation`]), speed-scaled collision zones are assessed
//! pairwise ([`conflict_zones`]), future waypoints and safety travel tubes
//! are projected ([`trajectory_prediction`]), and the avoidance policy
//! turns imminent risks into minimum-deviation maneuvers ([`avoidance`]).
//! The [`simulator`] wraps the pipeline in a deterministic discrete-time
//! world that replays, scripts, or ingests live traffic and scores runs
//! against near-mid-air-collision separation standards.

pub mod airspace_filter;
pub mod avoidance;
pub mod config;
pub mod conflict_zones;
pub mod ec_ingest;
pub mod exec;
pub mod geodesy;
pub mod simulator;
pub mod state_estimation;
pub mod trajectory_prediction;
pub mod units;

pub use config::EngineConfig;
pub use geodesy::GeoPoint;
