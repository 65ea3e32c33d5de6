use crate::cga::Neighbor;
use crate::error::{Error, Result};
use crate::metrics::{timed, OpMetrics};
use crate::types::{PointRecord, PointSoup, QuantizedPoint};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
enum KdNode {
    /// Left holds coordinates `<= value` on `axis`, right holds `>= value`.
    Split { axis: u8, value: u32, left: u32, right: u32 },
    Leaf { start: u32, end: u32 },
}

/// Median-split kd-tree; split axes cycle x, y, z and leaves hold at most
/// eight points.
#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<KdNode>,
    points: Vec<PointRecord>,
}

fn coord(p: QuantizedPoint, axis: u8) -> u32 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

impl KdTree {
    pub fn build(soup: &PointSoup) -> Result<(Self, OpMetrics)> {
        if soup.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(timed(|| {
            let mut tree = KdTree {
                nodes: Vec::new(),
                points: soup.records().to_vec(),
            };
            let n = tree.points.len();
            tree.build_range(0, n, 0);
            let metrics = OpMetrics {
                element_reads: n as u64,
                node_hops: tree.nodes.len() as u64,
                bytes: tree.footprint(),
                ..OpMetrics::default()
            };
            (tree, metrics)
        }))
    }

    fn build_range(&mut self, start: usize, end: usize, axis: u8) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let mid = start + (end - start) / 2;
        let slice = &mut self.points[start..end];
        slice.select_nth_unstable_by_key(mid - start, |r| (coord(r.point, axis), r.point));
        let value = coord(self.points[mid].point, axis);
        self.nodes.push(KdNode::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let next = (axis + 1) % 3;
        let l = self.build_range(start, mid, next);
        let r = self.build_range(mid, end, next);
        if let KdNode::Split { left, right, .. } = &mut self.nodes[id as usize] {
            *left = l;
            *right = r;
        }
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn footprint(&self) -> u64 {
        // split node: axis byte + value + two child indices; points: 12 + 3
        self.nodes.len() as u64 * 13 + self.points.len() as u64 * 15
    }

    /// Nearest stored point. The search descends to the leaf holding `q`,
    /// takes its best point, then unwinds through each superior and only
    /// enters the far subtree when the splitting plane is no farther than
    /// the current best. Ties go to the lexicographically smallest point.
    pub fn nearest_neighbor(&self, q: QuantizedPoint) -> Result<(Neighbor, OpMetrics)> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(timed(|| {
            let mut best = Neighbor {
                point: QuantizedPoint::default(),
                color: Default::default(),
                distance_squared: u64::MAX,
            };
            let mut m = OpMetrics::default();
            self.search(0, q, &mut best, &mut m);
            (best, m)
        }))
    }

    fn search(&self, node: u32, q: QuantizedPoint, best: &mut Neighbor, m: &mut OpMetrics) {
        match self.nodes[node as usize] {
            KdNode::Leaf { start, end } => {
                for r in &self.points[start as usize..end as usize] {
                    m.element_reads += 1;
                    let d = r.point.distance_squared(q);
                    if (d, r.point) < (best.distance_squared, best.point) {
                        *best = Neighbor {
                            point: r.point,
                            color: r.color,
                            distance_squared: d,
                        };
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let c = coord(q, axis);
                let (near, far) = if c < value { (left, right) } else { (right, left) };
                m.node_hops += 1;
                self.search(near, q, best, m);
                let plane = c.abs_diff(value) as u64;
                if plane * plane <= best.distance_squared {
                    m.node_hops += 1;
                    self.search(far, q, best, m);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Rgb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_half_spaces(t: &KdTree, node: u32, bounds: &mut Vec<(u8, u32, bool)>) {
        match t.nodes[node as usize] {
            KdNode::Leaf { start, end } => {
                for r in &t.points[start as usize..end as usize] {
                    for &(axis, value, is_left) in bounds.iter() {
                        let c = coord(r.point, axis);
                        assert!(if is_left { c <= value } else { c >= value });
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                bounds.push((axis, value, true));
                check_half_spaces(t, left, bounds);
                bounds.pop();
                bounds.push((axis, value, false));
                check_half_spaces(t, right, bounds);
                bounds.pop();
            }
        }
    }

    #[test]
    fn soldier_query() {
        let pts = [(127, 15, 157), (127, 14, 159), (127, 15, 158), (127, 15, 159), (127, 17, 155), (127, 19, 153)];
        let recs = pts
            .iter()
            .map(|&(x, y, z)| PointRecord::new(QuantizedPoint::new(x, y, z), Rgb::default()))
            .collect();
        let soup = PointSoup::from_records(recs, 8, false).unwrap();
        let (t, _) = KdTree::build(&soup).unwrap();
        let (nn, _) = t.nearest_neighbor(QuantizedPoint::new(127, 16, 156)).unwrap();
        assert_eq!(nn.distance_squared, 2);
        assert_eq!(nn.point, QuantizedPoint::new(127, 15, 157));
        let (hit, _) = t.nearest_neighbor(QuantizedPoint::new(127, 19, 153)).unwrap();
        assert_eq!(hit.distance_squared, 0);
    }

    #[test]
    fn random_queries_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let recs = (0..1000)
            .map(|_| PointRecord::new(QuantizedPoint::new(rng.gen_range(0..64), rng.gen_range(0..64), rng.gen_range(0..64)), Rgb::default()))
            .collect();
        let soup = PointSoup::from_records(recs, 6, false).unwrap();
        let (t, _) = KdTree::build(&soup).unwrap();
        check_half_spaces(&t, 0, &mut Vec::new());
        for _ in 0..1000 {
            let q = QuantizedPoint::new(rng.gen_range(0..64), rng.gen_range(0..64), rng.gen_range(0..64));
            let expect = soup.points().map(|p| (p.distance_squared(q), p)).min().unwrap();
            let (nn, _) = t.nearest_neighbor(q).unwrap();
            assert_eq!((nn.distance_squared, nn.point), expect);
        }
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(KdTree::build(&PointSoup::empty(4, false)), Err(Error::EmptyInput)));
    }
}
