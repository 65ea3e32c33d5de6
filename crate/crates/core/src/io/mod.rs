//! Reading and writing clouds, grid downsampling and CSV reports.

mod ply;

pub use ply::{read_ply, write_ply, PlyFormat};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::OpMetrics;
use crate::types::{quantize, PointRecord, PointSoup, QuantizedPoint, RawPoint, Rgb};

/// Whitespace-separated `x y z` or `x y z r g b` lines. Blank lines and
/// lines starting with `#` are skipped.
pub fn read_xyz<R: BufRead>(r: R) -> Result<Vec<RawPoint>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", n + 1)))?;
        let color = match values.len() {
            3 => None,
            6 => Some(Rgb::new(
                values[3].round().clamp(0.0, 255.0) as u8,
                values[4].round().clamp(0.0, 255.0) as u8,
                values[5].round().clamp(0.0, 255.0) as u8,
            )),
            k => return Err(Error::InvalidArgument(format!("line {}: expected 3 or 6 values, found {k}", n + 1))),
        };
        out.push(RawPoint::new([values[0], values[1], values[2]], color));
    }
    Ok(out)
}

/// Raw points from a `.ply` file, or from a text xyz file for any other
/// extension.
pub fn read_points(path: &Path) -> Result<Vec<RawPoint>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let is_ply = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    let parsed = if is_ply { read_ply(reader) } else { read_xyz(reader) };
    parsed.map_err(|e| match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

/// Voxelizes raw points. Coordinates that are already integers in
/// `[0, 2^qp)` are kept as they are; anything else is rescaled by
/// [`quantize`].
pub fn voxelize(raw: &[RawPoint], qp: u8) -> Result<PointSoup> {
    match PointSoup::from_voxelized(raw, qp)? {
        Some(soup) => Ok(soup),
        None => quantize(raw, qp),
    }
}

pub fn load_cloud(path: &Path, qp: u8) -> Result<PointSoup> {
    voxelize(&read_points(path)?, qp)
}

/// One output point per occupied `gridstep`-sized cell, placed at the
/// centroid of its points (rounded half up) and carrying their averaged
/// color.
pub fn grid_downsample(soup: &PointSoup, gridstep: u32) -> Result<PointSoup> {
    if gridstep == 0 {
        return Err(Error::InvalidArgument("gridstep must be at least 1".into()));
    }
    let mut keyed: Vec<([u32; 3], &PointRecord)> = soup
        .records()
        .iter()
        .map(|r| (r.point.to_array().map(|c| c / gridstep), r))
        .collect();
    keyed.sort_by_key(|&(k, r)| (k, r.point));
    let mut out = Vec::new();
    for bucket in keyed.chunk_by(|a, b| a.0 == b.0) {
        let n = bucket.len() as u64;
        let mut sums = [0u64; 3];
        for (_, r) in bucket {
            for (s, c) in sums.iter_mut().zip(r.point.to_array()) {
                *s += c as u64;
            }
        }
        let centroid = sums.map(|s| ((2 * s + n) / (2 * n)) as u32);
        let colors: Vec<Rgb> = bucket.iter().map(|(_, r)| r.color).collect();
        out.push(PointRecord::new(QuantizedPoint::from_array(centroid), Rgb::average(&colors)));
    }
    PointSoup::from_records(out, soup.qp(), soup.has_color())
}

/// One measurement line of a benchmark report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub structure: String,
    pub operation: String,
    pub points: u64,
    pub wall_ns: u64,
    pub element_reads: u64,
    pub node_hops: u64,
    pub bytes: u64,
}

impl ReportRow {
    pub fn new(structure: &str, operation: &str, points: u64, m: OpMetrics) -> Self {
        ReportRow {
            structure: structure.to_string(),
            operation: operation.to_string(),
            points,
            wall_ns: m.wall_ns,
            element_reads: m.element_reads,
            node_hops: m.node_hops,
            bytes: m.bytes,
        }
    }
}

pub const REPORT_HEADER: [&str; 7] = ["structure", "operation", "points", "wall_ns", "element_reads", "node_hops", "bytes"];

/// CSV with a header line followed by the rows in the given order.
pub fn write_report(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Stream(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn soup(points: &[((u32, u32, u32), u8)]) -> PointSoup {
        let recs = points
            .iter()
            .map(|&((x, y, z), c)| PointRecord::new(QuantizedPoint::new(x, y, z), Rgb::new(c, c, c)))
            .collect();
        PointSoup::from_records(recs, 10, true).unwrap()
    }

    #[test]
    fn xyz_text() {
        let pts = read_xyz("# header\n1 2 3\n\n4,5,6 7 8 9\n".as_bytes()).unwrap();
        assert_eq!(pts, vec![RawPoint::new([1.0, 2.0, 3.0], None), RawPoint::new([4.0, 5.0, 6.0], Some(Rgb::new(7, 8, 9)))]);
        assert!(read_xyz("1 2\n".as_bytes()).is_err());
        assert!(read_xyz("1 2 x\n".as_bytes()).is_err());
    }

    #[test]
    fn voxelize_keeps_integer_grids() {
        let raw = [RawPoint::new([127.0, 15.0, 158.0], None), RawPoint::new([0.0, 0.0, 1.0], None)];
        let s = voxelize(&raw, 10).unwrap();
        assert!(s.contains(QuantizedPoint::new(127, 15, 158)));
        let scaled = voxelize(&[RawPoint::new([0.5, 0.0, 0.0], None), RawPoint::new([1.5, 1.0, 1.0], None)], 10).unwrap();
        assert!(scaled.contains(QuantizedPoint::new(1023, 1023, 1023)));
    }

    #[test]
    fn downsample_identity_and_average() {
        let s = soup(&[((1, 2, 3), 9), ((4, 5, 6), 7)]);
        assert_eq!(grid_downsample(&s, 1).unwrap(), s);
        let pair = soup(&[((0, 0, 0), 0), ((1, 1, 1), 2)]);
        let d = grid_downsample(&pair, 4).unwrap();
        assert_eq!(d.records(), &[PointRecord::new(QuantizedPoint::new(1, 1, 1), Rgb::new(1, 1, 1))]);
        assert!(grid_downsample(&s, 0).is_err());
    }

    #[test]
    fn downsample_counts_occupied_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let recs = (0..10_000)
            .map(|_| PointRecord::new(QuantizedPoint::new(rng.gen_range(0..1024), rng.gen_range(0..1024), rng.gen_range(0..1024)), Rgb::default()))
            .collect();
        let s = PointSoup::from_records(recs, 10, false).unwrap();
        for step in [2u32, 4, 64] {
            let cells: HashSet<[u32; 3]> = s.points().map(|p| p.to_array().map(|c| c / step)).collect();
            let d = grid_downsample(&s, step).unwrap();
            assert_eq!(d.len(), cells.len());
            assert!(d.len() <= s.len());
            let bounds = s.bounding_box().unwrap();
            assert!(d.points().all(|p| bounds.contains(p) && cells.contains(&p.to_array().map(|c| c / step))));
        }
    }

    #[test]
    fn report_fixtures() {
        let header = "structure,operation,points,wall_ns,element_reads,node_hops,bytes\n";
        assert_eq!(String::from_utf8(write_report(&[]).unwrap()).unwrap(), header);
        let m = OpMetrics {
            wall_ns: 120,
            element_reads: 18,
            node_hops: 0,
            bytes: 90,
        };
        let one = write_report(&[ReportRow::new("cga", "build", 6, m)]).unwrap();
        assert_eq!(String::from_utf8(one).unwrap(), format!("{header}cga,build,6,120,18,0,90\n"));
        let rows = [
            ReportRow::new("cga", "enumerate", 6, OpMetrics { element_reads: 22, ..m }),
            ReportRow::new("octree", "enumerate", 6, OpMetrics { node_hops: 40, element_reads: 0, bytes: 0, wall_ns: 5 }),
        ];
        assert_eq!(
            String::from_utf8(write_report(&rows).unwrap()).unwrap(),
            format!("{header}cga,enumerate,6,120,22,0,90\noctree,enumerate,6,5,0,40,0\n")
        );
    }
}
