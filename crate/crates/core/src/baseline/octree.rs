use std::collections::VecDeque;

use crate::cga::{MergePolicy, Neighbor};
use crate::error::{Error, Result};
use crate::metrics::{timed, OpMetrics};
use crate::types::{Aabb, PointRecord, PointSoup, QuantizedPoint, Rgb};

/// Child slot holding no node.
pub const EMPTY_SLOT: u32 = u32::MAX;

const SLOT_BYTES: u64 = 4;
const LEAF_BYTES: u64 = 3;

/// Internal node: eight child slots and the occupancy byte.
///
/// Slots of nodes on the last internal level index the leaf table; all
/// other slots index the node table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OctreeNode {
    pub children: [u32; 8],
    pub occupancy: u8,
}

impl OctreeNode {
    fn new() -> Self {
        OctreeNode {
            children: [EMPTY_SLOT; 8],
            occupancy: 0,
        }
    }
}

/// Occupancy bit for child `c`, most significant bit first.
#[inline]
fn occupancy_bit(c: usize) -> u8 {
    0x80 >> c
}

/// Child index at `level` for a coordinate relative to the root corner.
#[inline]
pub fn child_index(rel: [u32; 3], depth: u8, level: u8) -> usize {
    let shift = depth - 1 - level;
    ((rel[0] >> shift & 1) << 2 | (rel[1] >> shift & 1) << 1 | (rel[2] >> shift & 1)) as usize
}

/// Standard-representation octree stored as a node table.
///
/// Every leaf sits at `depth`, one voxel per leaf; only occupied children
/// are allocated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Octree {
    nodes: Vec<OctreeNode>,
    leaves: Vec<Rgb>,
    root_box: Aabb,
    depth: u8,
    qp: u8,
    has_color: bool,
}

impl Octree {
    /// Builds an octree with `depth = qp` over the cube `[0, 2^qp)^3`.
    pub fn build(soup: &PointSoup) -> Result<(Self, OpMetrics)> {
        let root = Aabb::cube(QuantizedPoint::default(), soup.qp());
        Octree::build_in_box(soup, root)
    }

    /// Builds over an explicit cubic root box with power-of-two side.
    pub fn build_in_box(soup: &PointSoup, root_box: Aabb) -> Result<(Self, OpMetrics)> {
        if soup.is_empty() {
            return Err(Error::EmptyInput);
        }
        let depth = root_box
            .cube_depth()
            .filter(|&d| d >= 1)
            .ok_or_else(|| Error::InvalidArgument("octree root box must be a cube with side >= 2 and a power of two".into()))?;
        if let Some(p) = soup.points().find(|&p| !root_box.contains(p)) {
            return Err(Error::InvalidArgument(format!("point {p} lies outside the octree root box")));
        }
        Ok(timed(|| {
            let mut tree = Octree::empty(root_box, depth, soup.qp(), soup.has_color());
            let mut hops = 0;
            for rec in soup.records() {
                hops += tree.insert(rec.point, rec.color, MergePolicy::BaseWins);
            }
            let metrics = OpMetrics {
                element_reads: tree.nodes.len() as u64 * 9 + tree.leaves.len() as u64,
                node_hops: hops,
                bytes: tree.footprint(),
                ..OpMetrics::default()
            };
            (tree, metrics)
        }))
    }

    fn empty(root_box: Aabb, depth: u8, qp: u8, has_color: bool) -> Self {
        Octree {
            nodes: vec![OctreeNode::new()],
            leaves: Vec::new(),
            root_box,
            depth,
            qp,
            has_color,
        }
    }

    fn relative(&self, p: QuantizedPoint) -> [u32; 3] {
        [p.x - self.root_box.min.x, p.y - self.root_box.min.y, p.z - self.root_box.min.z]
    }

    /// Inserts a point, returning the node hops taken.
    fn insert(&mut self, p: QuantizedPoint, color: Rgb, policy: MergePolicy) -> u64 {
        let rel = self.relative(p);
        let mut node = 0usize;
        for level in 0..self.depth {
            let c = child_index(rel, self.depth, level);
            let last = level + 1 == self.depth;
            let slot = self.nodes[node].children[c];
            if slot == EMPTY_SLOT {
                let idx = if last {
                    self.leaves.push(color);
                    self.leaves.len() - 1
                } else {
                    self.nodes.push(OctreeNode::new());
                    self.nodes.len() - 1
                };
                let n = &mut self.nodes[node];
                n.children[c] = idx as u32;
                n.occupancy |= occupancy_bit(c);
                if last {
                    return self.depth as u64;
                }
                node = idx;
            } else if last {
                if policy == MergePolicy::Average {
                    let leaf = &mut self.leaves[slot as usize];
                    *leaf = Rgb::average(&[*leaf, color]);
                }
                return self.depth as u64;
            } else {
                node = slot as usize;
            }
        }
        unreachable!("depth >= 1")
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    pub fn root_box(&self) -> Aabb {
        self.root_box
    }

    pub fn nodes(&self) -> &[OctreeNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Bytes of the node layout: eight 4-byte slots and one occupancy byte
    /// per internal node, plus a 3-byte attribute per leaf.
    pub fn footprint(&self) -> u64 {
        self.nodes.len() as u64 * (8 * SLOT_BYTES + 1) + self.leaves.len() as u64 * LEAF_BYTES
    }

    /// Root-to-leaf descent. `node_hops` is the number of levels descended.
    pub fn lookup(&self, q: QuantizedPoint) -> (Option<Rgb>, OpMetrics) {
        timed(|| {
            let mut hops = 0;
            let found = self.lookup_counted(q, &mut hops);
            (found, OpMetrics { node_hops: hops, ..OpMetrics::default() })
        })
    }

    pub(crate) fn lookup_counted(&self, q: QuantizedPoint, hops: &mut u64) -> Option<Rgb> {
        if !self.root_box.contains(q) {
            return None;
        }
        let rel = self.relative(q);
        let mut node = 0usize;
        for level in 0..self.depth {
            let slot = self.nodes[node].children[child_index(rel, self.depth, level)];
            if slot == EMPTY_SLOT {
                return None;
            }
            *hops += 1;
            if level + 1 == self.depth {
                return Some(self.leaves[slot as usize]);
            }
            node = slot as usize;
        }
        None
    }

    /// Depth-first walk in ascending child order, which yields Morton
    /// order. Every descent and every return to a parent counts as a hop.
    pub fn enumerate(&self) -> (Vec<PointRecord>, OpMetrics) {
        timed(|| {
            let mut out = Vec::with_capacity(self.leaves.len());
            let mut hops = 0;
            if !self.leaves.is_empty() {
                self.walk(0, 0, [0; 3], &mut out, &mut hops);
            }
            (out, OpMetrics { node_hops: hops, ..OpMetrics::default() })
        })
    }

    fn walk(&self, node: usize, level: u8, rel: [u32; 3], out: &mut Vec<PointRecord>, hops: &mut u64) {
        let n = &self.nodes[node];
        let shift = self.depth - 1 - level;
        for (c, &slot) in n.children.iter().enumerate() {
            if slot == EMPTY_SLOT {
                continue;
            }
            let child_rel = [
                rel[0] | ((c as u32 >> 2) & 1) << shift,
                rel[1] | ((c as u32 >> 1) & 1) << shift,
                rel[2] | (c as u32 & 1) << shift,
            ];
            *hops += 2;
            if level + 1 == self.depth {
                let min = self.root_box.min;
                out.push(PointRecord::new(
                    QuantizedPoint::new(min.x + child_rel[0], min.y + child_rel[1], min.z + child_rel[2]),
                    self.leaves[slot as usize],
                ));
            } else {
                self.walk(slot as usize, level + 1, child_rel, out, hops);
            }
        }
    }

    /// Stored points as a lexicographically sorted soup.
    pub fn to_soup(&self) -> PointSoup {
        let (mut recs, _) = self.enumerate();
        recs.sort_by_key(|r| r.point);
        PointSoup::from_sorted_unchecked(recs, self.qp, self.has_color)
    }

    /// Nearest stored point by depth-first search, visiting children in
    /// order of box distance and pruning boxes farther than the best so far.
    /// Ties go to the lexicographically smallest point.
    pub fn nearest_neighbor(&self, q: QuantizedPoint) -> Result<(Neighbor, OpMetrics)> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(timed(|| {
            let mut hops = 0;
            let best = self.nearest_counted(q, &mut hops);
            (best, OpMetrics { node_hops: hops, ..OpMetrics::default() })
        }))
    }

    pub(crate) fn nearest_counted(&self, q: QuantizedPoint, hops: &mut u64) -> Neighbor {
        if let Some(color) = self.lookup_counted(q, hops) {
            return Neighbor {
                point: q,
                color,
                distance_squared: 0,
            };
        }
        let mut best = Neighbor {
            point: QuantizedPoint::default(),
            color: Rgb::default(),
            distance_squared: u64::MAX,
        };
        self.nearest_in(0, 0, self.root_box.min.to_array(), q.to_array(), &mut best, hops);
        best
    }

    fn nearest_in(&self, node: usize, level: u8, min: [u32; 3], q: [u32; 3], best: &mut Neighbor, hops: &mut u64) {
        let half = 1u32 << (self.depth - 1 - level);
        let mut order: Vec<(u64, usize, [u32; 3])> = self.nodes[node]
            .children
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s != EMPTY_SLOT)
            .map(|(c, _)| {
                let cmin = [
                    min[0] + ((c as u32 >> 2) & 1) * half,
                    min[1] + ((c as u32 >> 1) & 1) * half,
                    min[2] + (c as u32 & 1) * half,
                ];
                (box_distance_squared(cmin, half, q), c, cmin)
            })
            .collect();
        order.sort_unstable();
        for (d, c, cmin) in order {
            if d > best.distance_squared {
                break;
            }
            let slot = self.nodes[node].children[c] as usize;
            *hops += 1;
            if level + 1 == self.depth {
                let p = QuantizedPoint::from_array(cmin);
                if (d, p) < (best.distance_squared, best.point) {
                    *best = Neighbor {
                        point: p,
                        color: self.leaves[slot],
                        distance_squared: d,
                    };
                }
            } else {
                self.nearest_in(slot, level + 1, cmin, q, best, hops);
            }
        }
    }

    /// Inserts every point of `other` into a copy of `self`.
    pub fn merge(&self, other: &Octree, policy: MergePolicy) -> Result<(Self, OpMetrics)> {
        if self.qp != other.qp {
            return Err(Error::QpMismatch(self.qp, other.qp));
        }
        if self.root_box != other.root_box {
            return Err(Error::InvalidArgument("octree root boxes differ".into()));
        }
        Ok(timed(|| {
            let mut out = self.clone();
            out.has_color |= other.has_color;
            let (recs, walk) = other.enumerate();
            let mut hops = walk.node_hops;
            for r in recs {
                hops += out.insert(r.point, r.color, policy);
            }
            let metrics = OpMetrics {
                node_hops: hops,
                bytes: out.footprint(),
                ..OpMetrics::default()
            };
            (out, metrics)
        }))
    }

    /// Breadth-first occupancy bytes, one per internal node, children in
    /// ascending index. Bit `7 - c` of a byte is set iff child `c` exists.
    pub fn serialize_occupancy(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.nodes.len());
        if self.leaves.is_empty() {
            return out;
        }
        let mut queue = VecDeque::from([(0usize, 0u8)]);
        while let Some((node, level)) = queue.pop_front() {
            let n = &self.nodes[node];
            out.push(n.occupancy);
            if level + 1 < self.depth {
                for &slot in n.children.iter().filter(|&&s| s != EMPTY_SLOT) {
                    queue.push_back((slot as usize, level + 1));
                }
            }
        }
        out
    }

    /// Rebuilds geometry from an occupancy stream. Leaf attributes are
    /// left at their default.
    pub fn deserialize_occupancy(bytes: &[u8], depth: u8, root_box: Aabb, qp: u8) -> Result<Self> {
        if depth == 0 || root_box.cube_depth() != Some(depth) {
            return Err(Error::InvalidArgument(format!("root box is not a cube of depth {depth}")));
        }
        let mut tree = Octree::empty(root_box, depth, qp, false);
        let mut bytes = bytes.iter();
        let mut queue = VecDeque::from([(0usize, 0u8)]);
        while let Some((node, level)) = queue.pop_front() {
            let &code = bytes.next().ok_or(Error::TruncatedOccupancy)?;
            if code == 0 {
                return Err(Error::EmptyOccupancyCode);
            }
            tree.nodes[node].occupancy = code;
            for c in (0..8).filter(|&c| code & occupancy_bit(c) != 0) {
                let idx = if level + 1 == depth {
                    tree.leaves.push(Rgb::default());
                    tree.leaves.len() - 1
                } else {
                    tree.nodes.push(OctreeNode::new());
                    queue.push_back((tree.nodes.len() - 1, level + 1));
                    tree.nodes.len() - 1
                };
                tree.nodes[node].children[c] = idx as u32;
            }
        }
        if bytes.next().is_some() {
            return Err(Error::Bitstream("trailing bytes after occupancy stream".into()));
        }
        Ok(tree)
    }
}

fn box_distance_squared(min: [u32; 3], side: u32, q: [u32; 3]) -> u64 {
    (0..3)
        .map(|a| {
            let lo = min[a];
            let hi = min[a] + side - 1;
            let d = lo.saturating_sub(q[a]).max(q[a].saturating_sub(hi)) as u64;
            d * d
        })
        .sum()
}
