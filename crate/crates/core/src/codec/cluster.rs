//! Corner-initialized k-means and cluster motion.

use crate::error::{Error, Result};
use crate::types::{Aabb, PointRecord, PointSoup, QuantizedPoint};

pub const CLUSTERS: usize = 8;
pub const DEFAULT_MAX_ITERS: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Centroids plus the cluster id of each record, aligned with the soup's
/// record order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<[f64; 3]>,
    pub assignment: Vec<u8>,
}

/// One integer displacement per cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotionVectorSet(pub [[i32; 3]; CLUSTERS]);

fn dist2(p: [f64; 3], c: [f64; 3]) -> f64 {
    (0..3).map(|a| (p[a] - c[a]) * (p[a] - c[a])).sum()
}

fn as_f64(p: QuantizedPoint) -> [f64; 3] {
    [p.x as f64, p.y as f64, p.z as f64]
}

/// Nearest centroid; ties go to the lowest id.
fn nearest(p: [f64; 3], centroids: &[[f64; 3]]) -> u8 {
    let mut best = (f64::INFINITY, 0u8);
    for (i, &c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.0 {
            best = (d, i as u8);
        }
    }
    best.1
}

/// Lloyd iterations from explicit starting centroids. An empty cluster
/// keeps its centroid. Stops after `max_iters` updates or once no centroid
/// moves by `tol` or more.
pub fn kmeans_from(soup: &PointSoup, initial: Vec<[f64; 3]>, max_iters: usize, tol: f64) -> Result<ClusterModel> {
    if soup.is_empty() {
        return Err(Error::EmptyInput);
    }
    if initial.is_empty() || initial.len() > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!("cluster count {} out of range", initial.len())));
    }
    let points: Vec<[f64; 3]> = soup.points().map(as_f64).collect();
    let mut centroids = initial;
    let k = centroids.len();
    for _ in 0..max_iters {
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for &p in &points {
            let c = nearest(p, &centroids) as usize;
            counts[c] += 1;
            for a in 0..3 {
                sums[c][a] += p[a];
            }
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let n = counts[c] as f64;
            let next = [sums[c][0] / n, sums[c][1] / n, sums[c][2] / n];
            moved = moved.max(dist2(next, centroids[c]).sqrt());
            centroids[c] = next;
        }
        if moved < tol {
            break;
        }
    }
    let assignment = points.iter().map(|&p| nearest(p, &centroids)).collect();
    Ok(ClusterModel { centroids, assignment })
}

/// Eight clusters seeded at the corners of the frame's bounding box, in
/// octree child order.
pub fn kmeans8(soup: &PointSoup, max_iters: usize, tol: f64) -> Result<ClusterModel> {
    let bounds = soup.bounding_box().ok_or(Error::EmptyInput)?;
    let corners = (0..CLUSTERS).map(|c| as_f64(bounds.corner(c))).collect();
    kmeans_from(soup, corners, max_iters, tol)
}

pub fn kmeans8_default(soup: &PointSoup) -> Result<ClusterModel> {
    kmeans8(soup, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE)
}

/// `round(pred_centroid - ref_centroid)` per cluster.
pub fn estimate_motion(reference: &ClusterModel, predicted: &ClusterModel) -> MotionVectorSet {
    let mut mvs = [[0i32; 3]; CLUSTERS];
    for (c, mv) in mvs.iter_mut().enumerate() {
        if let (Some(r), Some(p)) = (reference.centroids.get(c), predicted.centroids.get(c)) {
            for a in 0..3 {
                mv[a] = (p[a] - r[a]).round() as i32;
            }
        }
    }
    MotionVectorSet(mvs)
}

/// Shifts each reference point by its cluster's vector, clamped to
/// `bounds`. Points landing on the same voxel are merged with averaged
/// colors.
pub fn motion_compensate(reference: &PointSoup, model: &ClusterModel, mvs: &MotionVectorSet, bounds: Aabb) -> Result<PointSoup> {
    if model.assignment.len() != reference.len() {
        return Err(Error::InvalidArgument("cluster assignment does not cover the reference frame".into()));
    }
    let lo = bounds.min.to_array();
    let hi = bounds.max.to_array();
    let moved: Vec<PointRecord> = reference
        .records()
        .iter()
        .zip(&model.assignment)
        .map(|(r, &c)| {
            let mv = mvs.0.get(c as usize).copied().unwrap_or_default();
            let p = r.point.to_array();
            let shifted: [u32; 3] = std::array::from_fn(|a| (p[a] as i64 + mv[a] as i64).clamp(lo[a] as i64, hi[a] as i64) as u32);
            PointRecord::new(QuantizedPoint::from_array(shifted), r.color)
        })
        .collect();
    PointSoup::from_records(moved, reference.qp(), reference.has_color())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Rgb;

    fn soup(points: &[(u32, u32, u32)]) -> PointSoup {
        let recs = points
            .iter()
            .map(|&(x, y, z)| PointRecord::new(QuantizedPoint::new(x, y, z), Rgb::new(1, 2, 3)))
            .collect();
        PointSoup::from_records(recs, 8, true).unwrap()
    }

    fn blob(center: (u32, u32, u32), r: u32) -> Vec<(u32, u32, u32)> {
        let mut v = Vec::new();
        for dx in 0..r {
            for dy in 0..r {
                for dz in 0..r {
                    v.push((center.0 + dx, center.1 + dy, center.2 + dz));
                }
            }
        }
        v
    }

    #[test]
    fn corners_are_a_fixed_point() {
        let pts: Vec<_> = (0..8).map(|c| ((c >> 2 & 1) * 10, (c >> 1 & 1) * 10, (c & 1) * 10)).collect();
        let s = soup(&pts);
        let m = kmeans8_default(&s).unwrap();
        let b = s.bounding_box().unwrap();
        for c in 0..8 {
            let corner = b.corner(c);
            assert_eq!(m.centroids[c], [corner.x as f64, corner.y as f64, corner.z as f64]);
        }
        let mut ids = m.assignment.clone();
        ids.sort();
        assert_eq!(ids, (0..8).collect::<Vec<u8>>());
    }

    #[test]
    fn identical_points_share_cluster_zero() {
        let s = soup(&[(5, 6, 7)]);
        let m = kmeans8_default(&s).unwrap();
        assert_eq!(m.assignment, vec![0]);
        assert!(m.centroids.iter().all(|&c| c == [5.0, 6.0, 7.0]));
    }

    #[test]
    fn deterministic() {
        let mut pts = blob((0, 0, 0), 5);
        pts.extend(blob((40, 3, 60), 4));
        pts.extend(blob((90, 80, 10), 6));
        let s = soup(&pts);
        assert_eq!(kmeans8_default(&s).unwrap(), kmeans8_default(&s).unwrap());
        assert!(kmeans8(&PointSoup::empty(8, true), 20, 1e-3).is_err());
    }

    #[test]
    fn translation_yields_uniform_motion() {
        let mut pts = blob((0, 0, 0), 5);
        pts.extend(blob((40, 3, 60), 4));
        pts.extend(blob((90, 80, 10), 6));
        let moved: Vec<_> = pts.iter().map(|&(x, y, z)| (x + 3, y, z)).collect();
        let r = kmeans8_default(&soup(&pts)).unwrap();
        let p = kmeans8_default(&soup(&moved)).unwrap();
        assert_eq!(r.assignment, p.assignment);
        let mvs = estimate_motion(&r, &p);
        assert!(mvs.0.iter().all(|&mv| mv == [3, 0, 0]));
        assert!(estimate_motion(&r, &r).0.iter().all(|&mv| mv == [0, 0, 0]));
    }

    #[test]
    fn compensation() {
        let s = soup(&[(1, 1, 1), (2, 2, 2), (250, 250, 250)]);
        let bounds = Aabb::cube(QuantizedPoint::default(), 8);
        let model = ClusterModel {
            centroids: vec![[0.0; 3]],
            assignment: vec![0, 0, 0],
        };
        let same = motion_compensate(&s, &model, &MotionVectorSet::default(), bounds).unwrap();
        assert_eq!(same, s);

        let mut mvs = MotionVectorSet::default();
        mvs.0[0] = [1, 1, 1];
        let shifted = motion_compensate(&s, &model, &mvs, bounds).unwrap();
        let pts: Vec<_> = shifted.points().collect();
        assert_eq!(pts, vec![QuantizedPoint::new(2, 2, 2), QuantizedPoint::new(3, 3, 3), QuantizedPoint::new(251, 251, 251)]);

        mvs.0[0] = [10, 10, 10];
        let clamped = motion_compensate(&s, &model, &mvs, bounds).unwrap();
        assert!(clamped.points().all(|p| bounds.contains(p)));
        let cga = crate::cga::CompressedGeometricArray::from_soup(&clamped);
        cga.validate().unwrap();
    }
}
