//! Spatio-temporal point-cloud codec.
//!
//! Every frame codes its geometry losslessly as breadth-first octree
//! occupancy bytes over a box shared by the whole sequence. Intra frames
//! code colors directly; inter frames code the difference to a
//! motion-compensated copy of the previous decoded frame. Attributes are
//! scanned in Morton order relative to the box corner, which is the order a
//! depth-first octree walk visits the voxels.
//!
//! Inter-frame correspondences are geometric nearest neighbors (ties to the
//! lexicographically smallest point), so the decoder, which never sees the
//! predicted colors, reproduces them exactly.

pub mod bitstream;
pub mod cluster;
pub mod color;
pub mod dct;

pub use bitstream::{split_frames, FrameBitstream, FrameHeader, FrameKind};
pub use cluster::{estimate_motion, kmeans8, kmeans8_default, motion_compensate, ClusterModel, MotionVectorSet};

use crate::baseline::Octree;
use crate::cga::{CompressedGeometricArray, Neighbor};
use crate::error::{Error, Result};
use crate::metrics::{timed, OpMetrics};
use crate::types::{Aabb, PointRecord, PointSoup, QuantizedPoint, Rgb, MAX_QP};
use color::{decode_channel, encode_channel, CodedBlock};

/// Reported instead of infinity for identical clouds.
pub const PSNR_CAP: f64 = 999.0;

const RESIDUAL_OFFSET: i32 = 255;
const RESIDUAL_MAX: u16 = 510;

/// Smallest power-of-two cube holding every point of every frame.
///
/// The cube is anchored at the per-axis minimum over all frames, pulled
/// back where needed so it stays inside `[0, 2^qp)`. The side is at least 2.
pub fn align_bounding_box(frames: &[PointSoup]) -> Result<Aabb> {
    let qp = frames.first().ok_or(Error::EmptyInput)?.qp();
    if let Some(f) = frames.iter().find(|f| f.qp() != qp) {
        return Err(Error::QpMismatch(qp, f.qp()));
    }
    let union = frames
        .iter()
        .filter_map(PointSoup::bounding_box)
        .reduce(|a, b| a.union(&b))
        .ok_or(Error::EmptyInput)?;
    let longest = union.extent().into_iter().max().unwrap_or(1);
    let side = longest.next_power_of_two().max(2);
    let depth = side.trailing_zeros() as u8;
    let limit = 1u64 << qp;
    let min = union.min.to_array().map(|m| (m as u64).min(limit.saturating_sub(side as u64)) as u32);
    Ok(Aabb::cube(QuantizedPoint::from_array(min), depth))
}

fn box_depth(bounds: Aabb) -> Result<u8> {
    bounds
        .cube_depth()
        .filter(|&d| d >= 1)
        .ok_or_else(|| Error::InvalidArgument("codec box must be a power-of-two cube with side >= 2".into()))
}

fn channel_samples(colors: &[Rgb], channel: usize) -> Vec<u16> {
    colors.iter().map(|c| c.channels()[channel] as u16).collect()
}

fn encode_channels(samples: [Vec<u16>; 3], step: u16) -> Result<[Vec<CodedBlock>; 3]> {
    let [r, g, b] = samples;
    Ok([encode_channel(&r, step)?, encode_channel(&g, step)?, encode_channel(&b, step)?])
}

fn decode_channels(frame: &FrameBitstream, count: usize, max: u16) -> Result<Option<[Vec<u16>; 3]>> {
    let Some(channels) = &frame.attributes else {
        return Ok(None);
    };
    let s = frame.header.step;
    Ok(Some([
        decode_channel(&channels[0], count, s[0], max)?,
        decode_channel(&channels[1], count, s[1], max)?,
        decode_channel(&channels[2], count, s[2], max)?,
    ]))
}

fn header(kind: FrameKind, soup: &PointSoup, bounds: Aabb, depth: u8, step: u16) -> Result<FrameHeader> {
    Ok(FrameHeader {
        kind,
        qp: soup.qp(),
        has_color: soup.has_color(),
        depth,
        point_count: u32::try_from(soup.len()).map_err(|_| Error::InvalidArgument("frame has too many points".into()))?,
        root_min: bounds.min,
        step: [step; 3],
    })
}

/// Geometry of a frame as records in Morton scan order, colors unset.
fn decode_geometry(frame: &FrameBitstream) -> Result<Vec<PointRecord>> {
    let h = &frame.header;
    if h.qp == 0 || h.qp > MAX_QP {
        return Err(Error::QpOutOfRange(h.qp as u32));
    }
    if h.depth == 0 || h.depth > h.qp {
        return Err(Error::Bitstream(format!("invalid octree depth {}", h.depth)));
    }
    let last = (1u64 << h.depth) - 1;
    if h.root_min.to_array().iter().any(|&m| m as u64 + last >= 1u64 << h.qp) {
        return Err(Error::Bitstream("root box exceeds the coordinate range".into()));
    }
    let bounds = Aabb::cube(h.root_min, h.depth);
    let tree = Octree::deserialize_occupancy(&frame.occupancy, h.depth, bounds, h.qp)?;
    let (recs, _) = tree.enumerate();
    if recs.len() != h.point_count as usize {
        return Err(Error::Bitstream(format!(
            "occupancy holds {} points, header declares {}",
            recs.len(),
            h.point_count
        )));
    }
    Ok(recs)
}

/// Codes one frame on its own. `bounds` must be a power-of-two cube
/// containing the frame, normally from [`align_bounding_box`].
pub fn encode_intra(soup: &PointSoup, bounds: Aabb, step: u16) -> Result<FrameBitstream> {
    let depth = box_depth(bounds)?;
    let (tree, _) = Octree::build_in_box(soup, bounds)?;
    let attributes = if soup.has_color() {
        let (scan, _) = tree.enumerate();
        let colors: Vec<Rgb> = scan.iter().map(|r| r.color).collect();
        Some(encode_channels(std::array::from_fn(|c| channel_samples(&colors, c)), step)?)
    } else {
        None
    };
    Ok(FrameBitstream {
        header: header(FrameKind::Intra, soup, bounds, depth, step)?,
        occupancy: tree.serialize_occupancy(),
        motion: None,
        attributes,
    })
}

pub fn decode_intra(frame: &FrameBitstream) -> Result<PointSoup> {
    if frame.header.kind != FrameKind::Intra {
        return Err(Error::Bitstream("expected an intra frame".into()));
    }
    let mut recs = decode_geometry(frame)?;
    if let Some([r, g, b]) = decode_channels(frame, recs.len(), 255)? {
        for (i, rec) in recs.iter_mut().enumerate() {
            rec.color = Rgb::new(r[i] as u8, g[i] as u8, b[i] as u8);
        }
    }
    PointSoup::from_records(recs, frame.header.qp, frame.header.has_color)
}

/// Encoder-side bookkeeping for one inter frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InterStats {
    /// Cost of the correspondence search against the compensated CGA.
    pub match_metrics: OpMetrics,
    pub exact_matches: usize,
    /// Sum of absolute color differences over all correspondences.
    pub total_sad: u64,
}

/// Clusters the reference, shifts each cluster by its motion vector and
/// returns the compensated reference.
pub fn compensate_reference(reference: &PointSoup, mvs: &MotionVectorSet, bounds: Aabb) -> Result<PointSoup> {
    let model = kmeans8_default(reference)?;
    motion_compensate(reference, &model, mvs, bounds)
}

/// Nearest compensated point for every point of `pred`, in `pred`'s record
/// order, using streaming cursors over the CGA.
pub fn match_points_cga(compensated: &CompressedGeometricArray, pred: &PointSoup) -> Result<(Vec<Neighbor>, OpMetrics)> {
    if compensated.is_empty() {
        return Err(Error::EmptyInput);
    }
    let queries: Vec<QuantizedPoint> = pred.points().collect();
    Ok(timed(|| {
        let mut reads = 0;
        let matches = compensated.match_sorted(&queries, &mut reads);
        (matches, OpMetrics { element_reads: reads, ..OpMetrics::default() })
    }))
}

/// The same correspondences found with one octree lookup per point,
/// falling back to octree nearest-neighbor search on a miss.
pub fn match_points_octree(compensated: &Octree, pred: &PointSoup) -> Result<(Vec<Neighbor>, OpMetrics)> {
    if compensated.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(timed(|| {
        let mut hops = 0;
        let matches = pred.points().map(|q| compensated.nearest_counted(q, &mut hops)).collect();
        (matches, OpMetrics { node_hops: hops, ..OpMetrics::default() })
    }))
}

/// Permutation from Morton scan order to record order.
fn scan_to_record(scan: &[PointRecord], soup: &PointSoup) -> Vec<usize> {
    scan.iter()
        .map(|r| {
            soup.records()
                .binary_search_by_key(&r.point, |s| s.point)
                .expect("scan and soup hold the same points")
        })
        .collect()
}

/// Codes `pred` against the previous decoded frame.
pub fn encode_inter(pred: &PointSoup, ref_decoded: &PointSoup, bounds: Aabb, step: u16) -> Result<(FrameBitstream, InterStats)> {
    if ref_decoded.is_empty() {
        return Err(Error::EmptyInput);
    }
    if pred.qp() != ref_decoded.qp() {
        return Err(Error::QpMismatch(pred.qp(), ref_decoded.qp()));
    }
    let depth = box_depth(bounds)?;
    let (tree, _) = Octree::build_in_box(pred, bounds)?;
    let ref_model = kmeans8_default(ref_decoded)?;
    let mvs = estimate_motion(&ref_model, &kmeans8_default(pred)?);
    let compensated = motion_compensate(ref_decoded, &ref_model, &mvs, bounds)?;
    let cga = CompressedGeometricArray::from_soup(&compensated);
    let (matches, match_metrics) = match_points_cga(&cga, pred)?;

    let mut stats = InterStats {
        match_metrics,
        ..InterStats::default()
    };
    for (rec, m) in pred.records().iter().zip(&matches) {
        stats.exact_matches += (m.distance_squared == 0) as usize;
        stats.total_sad += rec.color.sad(m.color) as u64;
    }

    let attributes = if pred.has_color() {
        let (scan, _) = tree.enumerate();
        let order = scan_to_record(&scan, pred);
        let samples = std::array::from_fn(|c| {
            order
                .iter()
                .map(|&i| {
                    let p = pred.records()[i].color.channels()[c] as i32;
                    let m = matches[i].color.channels()[c] as i32;
                    (p - m + RESIDUAL_OFFSET) as u16
                })
                .collect()
        });
        Some(encode_channels(samples, step)?)
    } else {
        None
    };
    let frame = FrameBitstream {
        header: header(FrameKind::Inter, pred, bounds, depth, step)?,
        occupancy: tree.serialize_occupancy(),
        motion: Some(mvs),
        attributes,
    };
    Ok((frame, stats))
}

pub fn decode_inter(frame: &FrameBitstream, ref_decoded: &PointSoup) -> Result<PointSoup> {
    let h = &frame.header;
    let mvs = match (h.kind, &frame.motion) {
        (FrameKind::Inter, Some(mvs)) => mvs,
        _ => return Err(Error::Bitstream("expected an inter frame".into())),
    };
    if ref_decoded.is_empty() {
        return Err(Error::EmptyInput);
    }
    if ref_decoded.qp() != h.qp {
        return Err(Error::QpMismatch(h.qp, ref_decoded.qp()));
    }
    let scan = decode_geometry(frame)?;
    let mut sorted = scan.clone();
    sorted.sort_by_key(|r| r.point);
    let geometry = PointSoup::from_sorted_unchecked(sorted, h.qp, h.has_color);
    let Some([r, g, b]) = decode_channels(frame, scan.len(), RESIDUAL_MAX)? else {
        return Ok(geometry);
    };

    let bounds = Aabb::cube(h.root_min, h.depth);
    let compensated = compensate_reference(ref_decoded, mvs, bounds)?;
    let cga = CompressedGeometricArray::from_soup(&compensated);
    let (matches, _) = match_points_cga(&cga, &geometry)?;
    let order = scan_to_record(&scan, &geometry);
    let mut recs = geometry.into_records();
    let residuals = [r, g, b];
    for (s, &i) in order.iter().enumerate() {
        let base = matches[i].color.channels();
        let color: [u8; 3] = std::array::from_fn(|c| (base[c] as i32 + residuals[c][s] as i32 - RESIDUAL_OFFSET).clamp(0, 255) as u8);
        recs[i].color = Rgb::from_channels(color);
    }
    Ok(PointSoup::from_sorted_unchecked(recs, h.qp, h.has_color))
}

/// Codes a sequence: the first frame intra, every later frame inter against
/// the decoded previous frame, all over one shared box.
pub fn encode_sequence(frames: &[PointSoup], step: u16) -> Result<Vec<FrameBitstream>> {
    let bounds = align_bounding_box(frames)?;
    let mut out = Vec::with_capacity(frames.len());
    let mut previous: Option<PointSoup> = None;
    for frame in frames {
        let coded = match &previous {
            None => encode_intra(frame, bounds, step)?,
            Some(reference) => encode_inter(frame, reference, bounds, step)?.0,
        };
        previous = Some(match &previous {
            None => decode_intra(&coded)?,
            Some(reference) => decode_inter(&coded, reference)?,
        });
        out.push(coded);
    }
    Ok(out)
}

pub fn decode_sequence(frames: &[FrameBitstream]) -> Result<Vec<PointSoup>> {
    let mut out: Vec<PointSoup> = Vec::with_capacity(frames.len());
    for frame in frames {
        let decoded = match frame.header.kind {
            FrameKind::Intra => decode_intra(frame)?,
            FrameKind::Inter => {
                let reference = out.last().ok_or_else(|| Error::Bitstream("inter frame without a reference".into()))?;
                decode_inter(frame, reference)?
            }
        };
        out.push(decoded);
    }
    Ok(out)
}

/// Concatenated frame bytes.
pub fn write_container(frames: &[FrameBitstream]) -> Vec<u8> {
    frames.iter().flat_map(FrameBitstream::to_bytes).collect()
}

fn mean_nn_distance_squared(from: &PointSoup, to: &CompressedGeometricArray) -> f64 {
    let mut reads = 0;
    let total: u64 = from.points().map(|p| to.nearest_counted(p, &mut reads).distance_squared).sum();
    total as f64 / from.len() as f64
}

/// Symmetric point-to-point geometric PSNR in dB. The peak is the diagonal
/// of the box aligned over both clouds.
pub fn psnr_point_to_point(original: &PointSoup, decoded: &PointSoup) -> Result<f64> {
    if original.is_empty() || decoded.is_empty() {
        return Err(Error::EmptyInput);
    }
    let peak = align_bounding_box(&[original.clone(), decoded.clone()])?.diagonal();
    let a = CompressedGeometricArray::from_soup(original);
    let b = CompressedGeometricArray::from_soup(decoded);
    let mse = mean_nn_distance_squared(decoded, &a).max(mean_nn_distance_squared(original, &b));
    Ok(psnr(peak, mse))
}

/// Color PSNR in dB over all three channels of two clouds with identical
/// geometry, with peak 255.
pub fn attribute_psnr(original: &PointSoup, decoded: &PointSoup) -> Result<f64> {
    if original.is_empty() {
        return Err(Error::EmptyInput);
    }
    if original.len() != decoded.len() || original.points().ne(decoded.points()) {
        return Err(Error::InvalidArgument("attribute PSNR needs identical geometry".into()));
    }
    let sum: u64 = original
        .records()
        .iter()
        .zip(decoded.records())
        .flat_map(|(a, b)| a.color.channels().into_iter().zip(b.color.channels()))
        .map(|(a, b)| (a.abs_diff(b) as u64).pow(2))
        .sum();
    Ok(psnr(255.0, sum as f64 / (3 * original.len()) as f64))
}

fn psnr(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
}

/// Raw size of `originals` over the coded size of `streams`. A raw point
/// takes `ceil(qp / 8)` bytes per coordinate plus three color bytes.
pub fn compression_ratio<S: AsRef<[u8]>>(streams: &[S], originals: &[PointSoup]) -> f64 {
    let raw: u64 = originals
        .iter()
        .map(|s| s.len() as u64 * (3 * (s.qp() as u64).div_ceil(8) + 3))
        .sum();
    let coded: u64 = streams.iter().map(|s| s.as_ref().len() as u64).sum();
    raw as f64 / coded as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Row = ((u32, u32, u32), (u8, u8, u8));

    fn soup(points: &[Row], qp: u8) -> PointSoup {
        let recs = points
            .iter()
            .map(|&((x, y, z), (r, g, b))| PointRecord::new(QuantizedPoint::new(x, y, z), Rgb::new(r, g, b)))
            .collect();
        PointSoup::from_records(recs, qp, true).unwrap()
    }

    fn random_soup(rng: &mut ChaCha8Rng, n: usize, qp: u8, lo: u32, hi: u32) -> PointSoup {
        let recs = (0..n)
            .map(|_| {
                PointRecord::new(
                    QuantizedPoint::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)),
                    Rgb::new(rng.gen(), rng.gen(), rng.gen()),
                )
            })
            .collect();
        PointSoup::from_records(recs, qp, true).unwrap()
    }

    fn translate(s: &PointSoup, d: [u32; 3]) -> PointSoup {
        let recs = s
            .records()
            .iter()
            .map(|r| {
                let p = r.point;
                PointRecord::new(QuantizedPoint::new(p.x + d[0], p.y + d[1], p.z + d[2]), r.color)
            })
            .collect();
        PointSoup::from_records(recs, s.qp(), s.has_color()).unwrap()
    }

    fn max_channel_error(a: &PointSoup, b: &PointSoup) -> u8 {
        a.records()
            .iter()
            .zip(b.records())
            .flat_map(|(x, y)| x.color.channels().into_iter().zip(y.color.channels()))
            .map(|(x, y)| x.abs_diff(y))
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn aligned_box_sides() {
        let a = soup(&[((0, 0, 0), (0, 0, 0)), ((255, 255, 255), (0, 0, 0))], 10);
        assert_eq!(align_bounding_box(std::slice::from_ref(&a)).unwrap(), Aabb::cube(QuantizedPoint::default(), 8));
        let b = soup(&[((0, 0, 0), (0, 0, 0)), ((100, 7, 7), (0, 0, 0))], 10);
        let c = soup(&[((0, 0, 0), (0, 0, 0)), ((300, 1, 1), (0, 0, 0))], 10);
        assert_eq!(align_bounding_box(&[b.clone(), c]).unwrap().extent(), [512; 3]);
        assert_eq!(align_bounding_box(&[b.clone(), b.clone()]).unwrap(), align_bounding_box(&[b]).unwrap());
        assert!(align_bounding_box(&[]).is_err());
        // anchored at the minimum but kept inside the coordinate range
        let d = soup(&[((1000, 1000, 1000), (0, 0, 0)), ((1010, 1001, 1001), (0, 0, 0))], 10);
        let bx = align_bounding_box(&[d]).unwrap();
        assert_eq!(bx, Aabb::cube(QuantizedPoint::new(1000, 1000, 1000), 4));
        let e = soup(&[((1020, 0, 0), (0, 0, 0)), ((1023, 9, 0), (0, 0, 0))], 10);
        assert_eq!(align_bounding_box(&[e]).unwrap().min, QuantizedPoint::new(1008, 0, 0));
    }

    #[test]
    fn intra_single_point() {
        let s = soup(&[((5, 6, 7), (10, 20, 30))], 10);
        let bx = align_bounding_box(std::slice::from_ref(&s)).unwrap();
        let f = encode_intra(&s, bx, 1).unwrap();
        let bytes = f.to_bytes();
        let (parsed, used) = FrameBitstream::from_bytes(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(parsed, f);
        assert_eq!(decode_intra(&parsed).unwrap(), s);
    }

    #[test]
    fn intra_soldier_rows() {
        let s = soup(
            &[
                ((127, 14, 159), (200, 10, 10)),
                ((127, 15, 157), (180, 40, 20)),
                ((127, 15, 158), (160, 60, 30)),
                ((127, 15, 159), (140, 80, 40)),
                ((127, 17, 155), (120, 100, 50)),
                ((127, 19, 153), (100, 120, 60)),
            ],
            10,
        );
        let bx = align_bounding_box(std::slice::from_ref(&s)).unwrap();
        let back = decode_intra(&encode_intra(&s, bx, 1).unwrap()).unwrap();
        assert!(back.points().eq(s.points()));
        assert!(max_channel_error(&s, &back) <= 4);
    }

    #[test]
    fn intra_geometry_lossless_at_any_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_soup(&mut rng, 3000, 10, 0, 1024);
        let bx = align_bounding_box(std::slice::from_ref(&s)).unwrap();
        for step in [1, 4, 16, 64] {
            let back = decode_intra(&encode_intra(&s, bx, step).unwrap()).unwrap();
            assert!(back.points().eq(s.points()));
            if step == 1 {
                assert!(max_channel_error(&s, &back) <= 4);
            }
        }
    }

    #[test]
    fn inter_self_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s = random_soup(&mut rng, 2000, 10, 100, 400);
        let bx = align_bounding_box(std::slice::from_ref(&s)).unwrap();
        let (f, stats) = encode_inter(&s, &s, bx, 1).unwrap();
        assert_eq!(f.motion, Some(MotionVectorSet::default()));
        assert_eq!(stats.exact_matches, s.len());
        assert_eq!(stats.total_sad, 0);
        // every residual is the offset, so only constant DC blocks remain
        let chans = f.attributes.as_ref().unwrap();
        assert!(chans.iter().flatten().all(|b| b.ac.is_empty()));
        assert!(chans.iter().all(|c| c[1..].iter().all(|b| b.dc_residual == 0)));
        assert_eq!(decode_inter(&f, &s).unwrap(), s);
        assert!(f.to_bytes().len() < encode_intra(&s, bx, 1).unwrap().to_bytes().len());
    }

    #[test]
    fn inter_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let r = random_soup(&mut rng, 2000, 10, 100, 400);
        let p = translate(&r, [3, 0, 0]);
        let bx = align_bounding_box(&[r.clone(), p.clone()]).unwrap();
        let (f, stats) = encode_inter(&p, &r, bx, 1).unwrap();
        assert!(f.motion.unwrap().0.iter().all(|&mv| mv == [3, 0, 0]));
        assert_eq!(stats.exact_matches, p.len());
        assert_eq!(stats.total_sad, 0);
        assert_eq!(decode_inter(&f, &r).unwrap(), p);
    }

    #[test]
    fn inter_random_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let r = random_soup(&mut rng, 1500, 9, 0, 512);
        let p = random_soup(&mut rng, 1200, 9, 0, 512);
        let bx = align_bounding_box(&[r.clone(), p.clone()]).unwrap();
        let (f, _) = encode_inter(&p, &r, bx, 1).unwrap();
        let bytes = f.to_bytes();
        let (parsed, _) = FrameBitstream::from_bytes(&bytes).unwrap();
        let back = decode_inter(&parsed, &r).unwrap();
        assert!(back.points().eq(p.points()));
        assert!(max_channel_error(&p, &back) <= 4);
        assert_eq!(encode_inter(&p, &r, bx, 1).unwrap().0.to_bytes(), bytes);
        assert!(encode_inter(&p, &PointSoup::empty(9, true), bx, 1).is_err());
        assert!(decode_inter(&parsed, &PointSoup::empty(9, true)).is_err());
    }

    #[test]
    fn match_loops_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let r = random_soup(&mut rng, 800, 8, 0, 64);
        let p = random_soup(&mut rng, 800, 8, 0, 64);
        let cga = CompressedGeometricArray::from_soup(&r);
        let (tree, _) = Octree::build(&r).unwrap();
        let (a, _) = match_points_cga(&cga, &p).unwrap();
        let (b, _) = match_points_octree(&tree, &p).unwrap();
        assert_eq!(a, b);
        for (q, m) in p.points().zip(&a) {
            let brute = r.points().map(|s| (s.distance_squared(q), s)).min().unwrap();
            assert_eq!((m.distance_squared, m.point), brute);
        }
    }

    #[test]
    fn sequence_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let a = random_soup(&mut rng, 500, 10, 0, 300);
        let b = translate(&a, [2, 1, 0]);
        let c = random_soup(&mut rng, 400, 10, 0, 300);
        let coded = encode_sequence(&[a.clone(), b.clone(), c.clone()], 1).unwrap();
        let bytes = write_container(&coded);
        let parsed = split_frames(&bytes).unwrap();
        assert_eq!(parsed, coded);
        let back = decode_sequence(&parsed).unwrap();
        for (orig, dec) in [a, b, c].iter().zip(&back) {
            assert!(orig.points().eq(dec.points()));
            assert!(max_channel_error(orig, dec) <= 4);
        }
    }

    #[test]
    fn malformed_streams() {
        let s = soup(&[((5, 6, 7), (10, 20, 30)), ((9, 9, 9), (1, 1, 1))], 10);
        let bx = align_bounding_box(std::slice::from_ref(&s)).unwrap();
        let bytes = encode_intra(&s, bx, 1).unwrap().to_bytes();
        assert!(FrameBitstream::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(FrameBitstream::from_bytes(b"XXXX").is_err());
        let mut bad = bytes.clone();
        bad[12] = 3; // point count
        assert!(decode_intra(&FrameBitstream::from_bytes(&bad).unwrap().0).is_err());
        assert!(decode_inter(&FrameBitstream::from_bytes(&bytes).unwrap().0, &s).is_err());
    }

    #[test]
    fn psnr_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let s = random_soup(&mut rng, 500, 10, 0, 1024);
        assert_eq!(psnr_point_to_point(&s, &s).unwrap(), PSNR_CAP);
        assert!(psnr_point_to_point(&s, &PointSoup::empty(10, true)).is_err());

        // one point moved by d into empty space: d^2 / K one way, 0 the other
        let base = soup(&[((0, 0, 0), (0, 0, 0)), ((10, 10, 10), (0, 0, 0)), ((20, 20, 20), (0, 0, 0)), ((31, 31, 31), (0, 0, 0))], 10);
        let moved = soup(&[((0, 0, 0), (0, 0, 0)), ((10, 10, 10), (0, 0, 0)), ((20, 20, 24), (0, 0, 0)), ((31, 31, 31), (0, 0, 0))], 10);
        let peak = 32.0 * 3f64.sqrt();
        let expected = 10.0 * (peak * peak / (16.0 / 4.0)).log10();
        assert!((psnr_point_to_point(&base, &moved).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn psnr_falls_with_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let s = random_soup(&mut rng, 2000, 10, 20, 1000);
        let mut last = f64::INFINITY;
        for amp in [1u32, 2, 4, 8, 16] {
            let mut jr = ChaCha8Rng::seed_from_u64(29);
            let recs = s
                .records()
                .iter()
                .map(|r| {
                    let j = |v: u32, rng: &mut ChaCha8Rng| v + amp - rng.gen_range(0..=2 * amp).min(v + amp);
                    let p = QuantizedPoint::new(j(r.point.x, &mut jr), j(r.point.y, &mut jr), j(r.point.z, &mut jr));
                    PointRecord::new(p, r.color)
                })
                .collect();
            let jittered = PointSoup::from_records(recs, 10, true).unwrap();
            let v = psnr_point_to_point(&s, &jittered).unwrap();
            assert!(v < last, "amp {amp}: {v} >= {last}");
            last = v;
        }
    }

    /// A gently curved sheet with a smooth color gradient.
    fn surface(n: u32, qp: u8) -> PointSoup {
        let mut recs = Vec::new();
        for x in 0..n {
            for y in 0..n {
                let z = 200 + (x * x + y * y) / (4 * n);
                recs.push(PointRecord::new(
                    QuantizedPoint::new(100 + x, 100 + y, z),
                    Rgb::new((x * 255 / n) as u8, (y * 255 / n) as u8, 128),
                ));
            }
        }
        PointSoup::from_records(recs, qp, true).unwrap()
    }

    #[test]
    fn ratio_and_step() {
        let s = surface(80, 10);
        let bx = align_bounding_box(std::slice::from_ref(&s)).unwrap();
        let mut last = 0.0;
        for step in [1u16, 2, 4, 8, 16, 32] {
            let bytes = encode_intra(&s, bx, step).unwrap().to_bytes();
            let ratio = compression_ratio(&[bytes], std::slice::from_ref(&s));
            assert!(ratio > 1.0, "step {step}: {ratio}");
            assert!(ratio >= last);
            last = ratio;
        }
        let back = decode_intra(&encode_intra(&s, bx, 1).unwrap()).unwrap();
        assert!(attribute_psnr(&s, &back).unwrap() > 30.0);
        assert_eq!(attribute_psnr(&s, &s).unwrap(), PSNR_CAP);
    }
}
