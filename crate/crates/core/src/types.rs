//! Shared domain types and quantization.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported coordinate bit depth. Three 21-bit coordinates
/// interleave into a 63-bit Morton code.
pub const MAX_QP: u8 = 21;

/// Voxel coordinate. Ordering is lexicographic on (x, y, z).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantizedPoint {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl QuantizedPoint {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        QuantizedPoint { x, y, z }
    }

    pub fn to_array(self) -> [u32; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [u32; 3]) -> Self {
        QuantizedPoint::new(a[0], a[1], a[2])
    }

    /// Exact squared Euclidean distance.
    pub fn distance_squared(self, other: QuantizedPoint) -> u64 {
        let dx = self.x.abs_diff(other.x) as u64;
        let dy = self.y.abs_diff(other.y) as u64;
        let dz = self.z.abs_diff(other.z) as u64;
        dx * dx + dy * dy + dz * dz
    }

    pub fn max_component(self) -> u32 {
        self.x.max(self.y).max(self.z)
    }

    pub fn fits(self, qp: u8) -> bool {
        (self.max_component() as u64) < (1u64 << qp)
    }
}

impl fmt::Display for QuantizedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// RGB attribute triple. Uncolored clouds carry black and clear
/// [`PointSoup::has_color`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_channels(c: [u8; 3]) -> Self {
        Rgb::new(c[0], c[1], c[2])
    }

    /// Sum of absolute channel differences.
    pub fn sad(self, other: Rgb) -> u32 {
        self.channels()
            .iter()
            .zip(other.channels())
            .map(|(&a, b)| a.abs_diff(b) as u32)
            .sum()
    }

    /// Channel-wise mean, rounded half up.
    pub fn average(colors: &[Rgb]) -> Rgb {
        let n = colors.len() as u32;
        if n == 0 {
            return Rgb::default();
        }
        let mut sums = [0u32; 3];
        for c in colors {
            for (s, v) in sums.iter_mut().zip(c.channels()) {
                *s += v as u32;
            }
        }
        Rgb::from_channels(sums.map(|s| ((s + n / 2) / n) as u8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointRecord {
    pub point: QuantizedPoint,
    pub color: Rgb,
}

impl PointRecord {
    pub const fn new(point: QuantizedPoint, color: Rgb) -> Self {
        PointRecord { point, color }
    }
}

/// An unquantized input point, as read from disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub position: [f64; 3],
    pub color: Option<Rgb>,
}

impl RawPoint {
    pub fn new(position: [f64; 3], color: Option<Rgb>) -> Self {
        RawPoint { position, color }
    }
}

/// A voxelized point set: deduplicated and sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSoup {
    records: Vec<PointRecord>,
    qp: u8,
    has_color: bool,
}

impl PointSoup {
    /// Builds a soup from arbitrary records. Records are sorted; records
    /// sharing a coordinate are merged with their colors averaged.
    pub fn from_records(mut records: Vec<PointRecord>, qp: u8, has_color: bool) -> Result<Self> {
        check_qp(qp as u32)?;
        if let Some(bad) = records.iter().find(|r| !r.point.fits(qp)) {
            return Err(Error::CoordinateOutOfRange {
                value: bad.point.max_component() as u64,
                qp,
            });
        }
        records.sort_by_key(|r| r.point);
        let records = merge_duplicates(records);
        Ok(PointSoup {
            records,
            qp,
            has_color,
        })
    }

    /// Wraps records that are already strictly sorted and in range.
    pub(crate) fn from_sorted_unchecked(records: Vec<PointRecord>, qp: u8, has_color: bool) -> Self {
        debug_assert!(records.windows(2).all(|w| w[0].point < w[1].point));
        PointSoup {
            records,
            qp,
            has_color,
        }
    }

    pub fn empty(qp: u8, has_color: bool) -> Self {
        PointSoup {
            records: Vec::new(),
            qp,
            has_color,
        }
    }

    /// Takes raw points whose coordinates are already non-negative integers
    /// below `2^qp`, without rescaling. Returns `None` if any coordinate is
    /// fractional, negative, or too large.
    pub fn from_voxelized(raw: &[RawPoint], qp: u8) -> Result<Option<Self>> {
        check_qp(qp as u32)?;
        let limit = (1u64 << qp) as f64;
        let mut records = Vec::with_capacity(raw.len());
        for p in raw {
            let mut c = [0u32; 3];
            for (dst, &v) in c.iter_mut().zip(&p.position) {
                if !(v >= 0.0 && v < limit && v.fract() == 0.0) {
                    return Ok(None);
                }
                *dst = v as u32;
            }
            records.push(PointRecord::new(
                QuantizedPoint::from_array(c),
                p.color.unwrap_or_default(),
            ));
        }
        let has_color = !raw.is_empty() && raw.iter().all(|p| p.color.is_some());
        PointSoup::from_records(records, qp, has_color).map(Some)
    }

    pub fn records(&self) -> &[PointRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PointRecord> {
        self.records
    }

    pub fn points(&self) -> impl Iterator<Item = QuantizedPoint> + '_ {
        self.records.iter().map(|r| r.point)
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    pub fn has_color(&self) -> bool {
        self.has_color
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::enclosing(self.points())
    }

    pub fn to_raw(&self) -> Vec<RawPoint> {
        self.records
            .iter()
            .map(|r| {
                RawPoint::new(
                    [r.point.x as f64, r.point.y as f64, r.point.z as f64],
                    self.has_color.then_some(r.color),
                )
            })
            .collect()
    }

    pub fn contains(&self, p: QuantizedPoint) -> bool {
        self.records.binary_search_by_key(&p, |r| r.point).is_ok()
    }
}

fn merge_duplicates(sorted: Vec<PointRecord>) -> Vec<PointRecord> {
    let mut out: Vec<PointRecord> = Vec::with_capacity(sorted.len());
    let mut run: Vec<Rgb> = Vec::new();
    for rec in sorted {
        match out.last_mut() {
            Some(last) if last.point == rec.point => {
                if run.is_empty() {
                    run.push(last.color);
                }
                run.push(rec.color);
                last.color = Rgb::average(&run);
            }
            _ => {
                run.clear();
                out.push(rec);
            }
        }
    }
    out
}

fn check_qp(qp: u32) -> Result<()> {
    if (1..=MAX_QP as u32).contains(&qp) {
        Ok(())
    } else {
        Err(Error::QpOutOfRange(qp))
    }
}

/// Axis-aligned box with inclusive integer corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Aabb {
    pub min: QuantizedPoint,
    pub max: QuantizedPoint,
}

impl Aabb {
    pub fn new(min: QuantizedPoint, max: QuantizedPoint) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Aabb { min, max }
    }

    /// Cube anchored at `min` with side `2^depth`.
    pub fn cube(min: QuantizedPoint, depth: u8) -> Self {
        let last = (1u32 << depth) - 1;
        Aabb::new(
            min,
            QuantizedPoint::new(min.x + last, min.y + last, min.z + last),
        )
    }

    pub fn enclosing(points: impl IntoIterator<Item = QuantizedPoint>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.to_array(), first.to_array());
        for p in it {
            for (axis, v) in p.to_array().into_iter().enumerate() {
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        Some(Aabb::new(QuantizedPoint::from_array(lo), QuantizedPoint::from_array(hi)))
    }

    pub fn contains(&self, p: QuantizedPoint) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    /// Number of voxels along each axis.
    pub fn extent(&self) -> [u32; 3] {
        [
            self.max.x - self.min.x + 1,
            self.max.y - self.min.y + 1,
            self.max.z - self.min.z + 1,
        ]
    }

    /// Octree depth if this box is a cube with a power-of-two side.
    pub fn cube_depth(&self) -> Option<u8> {
        let [a, b, c] = self.extent();
        (a == b && b == c && a.is_power_of_two()).then(|| a.trailing_zeros() as u8)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(
            QuantizedPoint::new(
                self.min.x.min(other.min.x),
                self.min.y.min(other.min.y),
                self.min.z.min(other.min.z),
            ),
            QuantizedPoint::new(
                self.max.x.max(other.max.x),
                self.max.y.max(other.max.y),
                self.max.z.max(other.max.z),
            ),
        )
    }

    /// Length of the diagonal spanned by the voxel extents.
    pub fn diagonal(&self) -> f64 {
        self.extent()
            .iter()
            .map(|&e| (e as f64) * (e as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// One of the eight corners, indexed with the octree child convention
    /// `(x_bit << 2) | (y_bit << 1) | z_bit`.
    pub fn corner(&self, index: usize) -> QuantizedPoint {
        let pick = |bit: usize, lo: u32, hi: u32| if index >> bit & 1 == 1 { hi } else { lo };
        QuantizedPoint::new(
            pick(2, self.min.x, self.max.x),
            pick(1, self.min.y, self.max.y),
            pick(0, self.min.z, self.max.z),
        )
    }
}

/// Voxelizes raw points.
///
/// Each axis is shifted so its minimum lands on zero, then all axes share
/// one scale factor mapping the largest extent onto `2^qp - 1`. Coordinates
/// are rounded to the nearest integer and colliding voxels are merged with
/// averaged colors. The result is sorted lexicographically.
pub fn quantize(raw: &[RawPoint], qp: u8) -> Result<PointSoup> {
    check_qp(qp as u32)?;
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in raw {
        for axis in 0..3 {
            let v = p.position[axis];
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coordinate {v}")));
            }
            lo[axis] = lo[axis].min(v);
            hi[axis] = hi[axis].max(v);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let top = ((1u64 << qp) - 1) as f64;
    let scale = if extent > 0.0 { top / extent } else { 0.0 };

    let has_color = raw.iter().all(|p| p.color.is_some());
    let records = raw
        .iter()
        .map(|p| {
            let c = [0, 1, 2].map(|a| ((p.position[a] - lo[a]) * scale).round().clamp(0.0, top) as u32);
            PointRecord::new(QuantizedPoint::from_array(c), p.color.unwrap_or_default())
        })
        .collect();
    PointSoup::from_records(records, qp, has_color)
}
