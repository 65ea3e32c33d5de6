//! Tree baselines: an eight-child octree with occupancy-code serialization
//! and a median-split kd-tree.

mod kdtree;
mod octree;

pub use kdtree::KdTree;
pub use octree::{child_index, Octree, OctreeNode, EMPTY_SLOT};
