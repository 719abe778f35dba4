//! Evolutionary clustering toolkit.
//!
//! The crate implements the improved evolutionary clustering algorithm star
//! (iECA*) end to end together with its ECA* baseline:
//!
//! * [`dataset_io`] loads delimited files with mixed real/integer/categorical
//!   attributes and infers a schema.
//! * [`preprocess`] cleans, encodes, normalizes and computes percentile ranks.
//! * [`elbow`] selects the cluster count from an SSE-versus-k scan.
//! * [`engine`] runs the mut-over evolutionary loop with diversity merging.
//! * [`metrics`] scores partitions (pair accuracy, NMI, ARI, nMSE, DBI).
//! * [`bench`] runs the multi-trial protocol, ranks algorithms and renders
//!   heatmaps.
//!
//! Everything is deterministic given a seed.

pub mod bench;
pub mod dataset_io;
pub mod elbow;
pub mod engine;
mod error;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
