//! Trajectory flow graphs: turn raw moving-object trajectories into a
//! time-evolving graph of aggregated region-to-region flows and segment the
//! daily series at structural change points.
//!
//! The pipeline has four stages:
//!
//! 1. [`ingest`] parses, validates and filters trajectories and fixes the
//!    day's slice axis.
//! 2. [`partition`] groups seed points into cells of a desired radius;
//!    [`voronoi`] materializes the cell boundaries.
//! 3. [`flowgraph`] measures region-to-region speeds per slice and applies
//!    an edge rule from [`rules`] to build binary snapshots.
//! 4. [`mdl`] co-clusters the snapshot adjacency matrices under an
//!    entropy-based encoding cost and detects change points where starting
//!    a new segment encodes the series more cheaply.
//!
//! [`synth`] generates planted-regime corpora for validation.

pub mod error;
pub mod flowgraph;
pub mod geo;
pub mod ingest;
pub mod mdl;
pub mod partition;
pub mod rules;
pub mod synth;
pub mod voronoi;

pub use error::{Error, Result};
