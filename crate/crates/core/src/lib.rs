//! Point-cloud processing on compressed geometric arrays (CGA).
//!
//! A CGA stores a sorted, voxelized point set as six flat arrays: distinct x
//! coordinates with offsets into the y coordinates of each x group, y
//! coordinates with offsets into the z coordinates of each (x, y) group, and
//! the attribute values aligned with the z coordinates. Repeated x and y
//! coordinates are never stored twice.
//!
//! The crate also carries the tree baselines the structure is measured
//! against (an eight-child octree and a kd-tree), projection and distance
//! helpers, a spatio-temporal compression codec, PLY/CSV I/O, and the
//! benchmark harness behind the `cga` binary. Every operation reports its
//! cost through an [`OpMetrics`] value returned alongside the result.

pub mod baseline;
pub mod bench;
pub mod cga;
pub mod codec;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod morton;
pub mod types;

pub use cga::{CompressedGeometricArray, MergePolicy, Neighbor};
pub use error::{Error, Result};
pub use metrics::OpMetrics;
pub use types::{quantize, Aabb, PointRecord, PointSoup, QuantizedPoint, RawPoint, Rgb, MAX_QP};
