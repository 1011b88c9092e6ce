//! Panoptic machining-feature recognition on B-Rep face-adjacency graphs.
//!
//! The crate is `no_std` (with `alloc`) and contains only the algorithmic
//! pieces:
//!
//! 1. [`graph`] – part graphs, validation and ground-truth edge labels.
//! 2. [`attributes`] – enriched per-edge rows and per-instance descriptors.
//! 3. [`learner`] – boosted decision trees, isotonic calibration and grouped
//!    cross-validated calibration.
//! 4. [`pipeline`] – boundary prediction, pruning, connected components and
//!    per-instance classification.
//! 5. [`metrics`] – panoptic quality, recognition & localization accuracy,
//!    edge metrics and reliability.
//! 6. [`synthgen`] – deterministic labeled synthetic parts.
//!
//! File formats, model persistence and the command-line tool live in the
//! `pafr` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attributes;
pub mod dsu;
pub mod graph;
pub mod learner;
pub mod metrics;
pub mod pipeline;
pub mod synthgen;

pub use graph::{
    AttrSlots, EdgeRecord, EdgeSamples, EdgeType, FaceGrid, FaceRecord, GroundTruth, PartGraph,
    Schema, SurfaceType,
};
pub use pipeline::{PanopticPrediction, PipelineModel, PredictedInstance};

/// Guard used wherever a ratio or logarithm needs protection from zero.
pub const EPSILON: f64 = 1e-9;
