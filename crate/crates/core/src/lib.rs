//! Planted-partition random connection models on Euclidean windows and tori.
//!
//! The library covers the full pipeline for studying community detection on
//! spatial random graphs at desk scale:
//!
//! - [`model`]: marked Poisson point processes, the planted graph `G`, the
//!   null random connection model `H`, and the coupled information graph `I`
//!   built from shared per-pair uniforms.
//! - [`geom`]: Euclidean/toroidal metrics, the `Z^d` grid tessellation used
//!   by the clustering algorithm, and ball/lens volume primitives.
//! - [`moments`]: closed-form and Monte Carlo evaluation of the analytic
//!   quantities driving thresholds (`M_in`/`M_out`, CH-divergence, Peierls
//!   sums, triangle profiles).
//! - [`gbg`]: the Good-Bad-Grid clustering algorithm and its cell tests.
//! - [`percolation`]: cluster analysis and percolation-probability estimates.
//! - [`eval`]: overlap, likelihood/Flip-Bad analysis, the triangle-profile
//!   distinguishability test, and the information-flow experiment.
//!
//! Everything is deterministic under a single `u64` seed; per-pair edge
//! uniforms come from a counter-based hash so coupled graphs never
//! materialize `O(N^2)` state.

pub mod error;
pub mod eval;
pub mod gbg;
pub mod geom;
pub mod model;
pub mod moments;
pub mod percolation;
pub mod rng;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
