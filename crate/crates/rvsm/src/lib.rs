//! File formats, parallel training and the command-line front end for
//! relevance vector semantic maps. The numerics live in `rvsm-core`.
//!
//! - [`cloud_io`]: labeled point clouds as CSV or PLY, with class dictionary sidecars.
//! - [`model_io`]: versioned JSON documents for binary models and map bundles.
//! - [`posterior_io`]: posterior export for mapping tools.
//! - [`report`]: evaluation reports as JSON and aligned tables.
//! - [`parallel`]: per-class training across threads.
//! - [`bench`]: query timing.
//! - [`cli`]: the `rvsm` binary.

pub mod bench;
pub mod cli;
pub mod cloud_io;
pub mod config;
mod error;
pub mod grid;
pub mod json;
pub mod model_io;
pub mod parallel;
mod ply;
pub mod posterior_io;
pub mod report;

pub use error::{Error, Location, Result};
pub use ply::PlyEncoding;
pub use rvsm_core as core;
