//! Config-driven experiment harness for the planted-partition random
//! connection model: parameter sweeps, deterministic seeding, CSV emission
//! and plot-data export.

pub mod chain;
pub mod config;
pub mod experiments;
