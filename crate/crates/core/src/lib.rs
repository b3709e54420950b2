//! Octree point-cloud geometry codec.
//!
//! A point cloud is quantized onto an `N`-bit integer grid, turned into an
//! octree and serialized breadth-first as one binary occupancy symbol per
//! candidate child cell. Each symbol is range coded with a probability that
//! an [`EntropyModel`](model::EntropyModel) predicts from a hybrid context:
//!
//! * a causal 4×4×4 window of same-level occupancy states ([`context::VoxelContext`]),
//! * the `K` nearest occupied cell centers of the fully coded parent level
//!   ([`context::PointContext`]),
//! * the normalized node coordinate ([`context::NodeCoordinate`]).
//!
//! Three models are provided: a uniform model, an adaptive context-hash
//! model, and a neural network executed from a PVW weight file.

pub mod codec;
pub mod context;
pub mod dataset;
mod error;
pub mod metrics;
pub mod model;
pub mod octree;
pub mod pcio;
pub mod rangecoder;
pub mod synth;

pub use error::{read_file, with_path, write_file, Error, ErrorKind, Location, Result};
