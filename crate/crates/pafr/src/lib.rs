//! File formats, model persistence, reports and the command-line tool for
//! [`pafr_core`].
//!
//! - [`format`]: line-delimited part files with a schema header.
//! - [`model_io`]: the binary model file.
//! - [`dataset`]: generated datasets, manifests and splits.
//! - [`run`]: parallel training, inference and evaluation over many parts.
//! - [`sweep`]: training-size sweeps written as CSV.
//! - [`report`]: JSON reports and their text tables.
//! - [`cli`]: the `pafr` binary.

pub mod cli;
pub mod dataset;
pub mod format;
pub mod model_io;
pub mod report;
pub mod run;
pub mod sweep;

pub use pafr_core;
