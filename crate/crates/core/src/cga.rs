//! Compressed geometric array.
//!
//! Layout for a sorted point set with `K` points:
//!
//! ```text
//! x_index   distinct x values, ascending                    len X
//! x_pointer x_pointer[0] = 0,
//!           x_pointer[i+1] = x_pointer[i] + #distinct y in x group i
//!                                                           len X + 1
//! y_index   y values of every (x, y) group, grouped by x    len Y
//! y_pointer y_pointer[0] = 0,
//!           y_pointer[j+1] = y_pointer[j] + #points in (x, y) group j
//!                                                           len Y + 1
//! z_index   z values, ascending within each (x, y) group    len K
//! value     attributes aligned with z_index                 len K
//! ```
//!
//! Searches inside an offset range are binary searches. The structure is
//! immutable; merging produces a new array.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::metrics::{timed, OpMetrics};
use crate::types::{PointRecord, PointSoup, QuantizedPoint, Rgb};

const INDEX_BYTES: u64 = std::mem::size_of::<u32>() as u64;
const VALUE_BYTES: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedGeometricArray {
    x_index: Vec<u32>,
    x_pointer: Vec<u32>,
    y_index: Vec<u32>,
    y_pointer: Vec<u32>,
    z_index: Vec<u32>,
    value: Vec<Rgb>,
    qp: u8,
    has_color: bool,
}

/// Result of a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub point: QuantizedPoint,
    pub color: Rgb,
    pub distance_squared: u64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        (self.distance_squared as f64).sqrt()
    }

    /// Strict ordering used for ties: smaller distance, then the
    /// lexicographically smaller point.
    fn beats(&self, distance_squared: u64, point: QuantizedPoint) -> bool {
        (distance_squared, point) < (self.distance_squared, self.point)
    }
}

/// Attribute rule for coordinates present in both inputs of a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergePolicy {
    #[default]
    BaseWins,
    Average,
}

struct Builder {
    cga: CompressedGeometricArray,
    last: Option<QuantizedPoint>,
}

impl Builder {
    fn new(qp: u8, has_color: bool, capacity: usize) -> Self {
        Builder {
            cga: CompressedGeometricArray {
                x_index: Vec::new(),
                x_pointer: vec![0],
                y_index: Vec::new(),
                y_pointer: vec![0],
                z_index: Vec::with_capacity(capacity),
                value: Vec::with_capacity(capacity),
                qp,
                has_color,
            },
            last: None,
        }
    }

    /// Appends a record. Records must arrive in strictly increasing order.
    fn push(&mut self, rec: PointRecord) {
        let p = rec.point;
        let c = &mut self.cga;
        let new_x = self.last.is_none_or(|l| l.x != p.x);
        let new_y = new_x || self.last.is_some_and(|l| l.y != p.y);
        debug_assert!(self.last.is_none_or(|l| l < p));
        if new_x {
            c.x_index.push(p.x);
            c.x_pointer.push(c.y_index.len() as u32);
        }
        if new_y {
            c.y_index.push(p.y);
            c.y_pointer.push(c.z_index.len() as u32);
            *c.x_pointer.last_mut().unwrap() += 1;
        }
        c.z_index.push(p.z);
        c.value.push(rec.color);
        *c.y_pointer.last_mut().unwrap() += 1;
        self.last = Some(p);
    }

    fn finish(self) -> CompressedGeometricArray {
        self.cga
    }
}

/// Forward walk over the arrays in storage order, counting every cell read.
pub struct Records<'a> {
    cga: &'a CompressedGeometricArray,
    xi: usize,
    yi: usize,
    k: usize,
    x_end: usize,
    y_end: usize,
    x: u32,
    y: u32,
    reads: u64,
}

impl Records<'_> {
    pub fn reads(&self) -> u64 {
        self.reads
    }
}

impl Iterator for Records<'_> {
    type Item = PointRecord;

    fn next(&mut self) -> Option<PointRecord> {
        let c = self.cga;
        if self.k >= c.z_index.len() {
            return None;
        }
        if self.k == self.y_end {
            if self.yi == self.x_end {
                self.x = c.x_index[self.xi];
                self.x_end = c.x_pointer[self.xi + 1] as usize;
                self.xi += 1;
                self.reads += 2;
            }
            self.y = c.y_index[self.yi];
            self.y_end = c.y_pointer[self.yi + 1] as usize;
            self.yi += 1;
            self.reads += 2;
        }
        let rec = PointRecord::new(
            QuantizedPoint::new(self.x, self.y, c.z_index[self.k]),
            c.value[self.k],
        );
        self.k += 1;
        self.reads += 2;
        Some(rec)
    }
}

/// Binary search over `slice[lo..hi]`, returning absolute positions.
fn search(slice: &[u32], lo: usize, hi: usize, target: u32, reads: &mut u64) -> std::result::Result<usize, usize> {
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        *reads += 1;
        match slice[mid].cmp(&target) {
            Ordering::Less => lo = mid + 1,
            Ordering::Greater => hi = mid,
            Ordering::Equal => return Ok(mid),
        }
    }
    Err(lo)
}

/// Position in the non-empty range `slice[lo..hi]` of the value closest to
/// `target`, preferring the smaller value on ties.
fn nearest_in(slice: &[u32], lo: usize, hi: usize, target: u32, reads: &mut u64) -> usize {
    match search(slice, lo, hi, target, reads) {
        Ok(i) => i,
        Err(i) if i == lo => i,
        Err(i) if i == hi => i - 1,
        Err(i) => {
            *reads += 2;
            if target - slice[i - 1] <= slice[i] - target {
                i - 1
            } else {
                i
            }
        }
    }
}

impl CompressedGeometricArray {
    /// Builds the arrays from a sorted, deduplicated soup.
    pub fn build(soup: &PointSoup) -> (Self, OpMetrics) {
        timed(|| {
            let mut b = Builder::new(soup.qp(), soup.has_color(), soup.len());
            for &rec in soup.records() {
                b.push(rec);
            }
            let cga = b.finish();
            let metrics = OpMetrics {
                element_reads: cga.cell_count(),
                bytes: cga.footprint(),
                ..OpMetrics::default()
            };
            (cga, metrics)
        })
    }

    pub fn empty(qp: u8, has_color: bool) -> Self {
        Builder::new(qp, has_color, 0).finish()
    }

    pub fn from_soup(soup: &PointSoup) -> Self {
        CompressedGeometricArray::build(soup).0
    }

    pub fn x_index(&self) -> &[u32] {
        &self.x_index
    }

    pub fn x_pointer(&self) -> &[u32] {
        &self.x_pointer
    }

    pub fn y_index(&self) -> &[u32] {
        &self.y_index
    }

    pub fn y_pointer(&self) -> &[u32] {
        &self.y_pointer
    }

    pub fn z_index(&self) -> &[u32] {
        &self.z_index
    }

    pub fn values(&self) -> &[Rgb] {
        &self.value
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    pub fn has_color(&self) -> bool {
        self.has_color
    }

    pub fn len(&self) -> usize {
        self.z_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_index.is_empty()
    }

    fn cell_count(&self) -> u64 {
        (self.x_index.len()
            + self.x_pointer.len()
            + self.y_index.len()
            + self.y_pointer.len()
            + self.z_index.len()
            + self.value.len()) as u64
    }

    /// Exact byte size of the six arrays: four bytes per coordinate or
    /// offset cell, three per attribute.
    pub fn footprint(&self) -> u64 {
        let index_cells = self.x_index.len()
            + self.x_pointer.len()
            + self.y_index.len()
            + self.y_pointer.len()
            + self.z_index.len();
        index_cells as u64 * INDEX_BYTES + self.value.len() as u64 * VALUE_BYTES
    }

    pub fn records(&self) -> Records<'_> {
        Records {
            cga: self,
            xi: 0,
            yi: 0,
            k: 0,
            x_end: 0,
            y_end: 0,
            x: 0,
            y: 0,
            reads: 0,
        }
    }

    /// All points in lexicographic order.
    pub fn enumerate(&self) -> (Vec<PointRecord>, OpMetrics) {
        timed(|| {
            let mut it = self.records();
            let out: Vec<_> = it.by_ref().collect();
            let metrics = OpMetrics {
                element_reads: it.reads(),
                ..OpMetrics::default()
            };
            (out, metrics)
        })
    }

    pub fn to_soup(&self) -> PointSoup {
        PointSoup::from_sorted_unchecked(self.records().collect(), self.qp, self.has_color)
    }

    pub(crate) fn lookup_counted(&self, q: QuantizedPoint, reads: &mut u64) -> Option<Rgb> {
        let xi = search(&self.x_index, 0, self.x_index.len(), q.x, reads).ok()?;
        *reads += 2;
        let (ys, ye) = (self.x_pointer[xi] as usize, self.x_pointer[xi + 1] as usize);
        let yi = search(&self.y_index, ys, ye, q.y, reads).ok()?;
        *reads += 2;
        let (zs, ze) = (self.y_pointer[yi] as usize, self.y_pointer[yi + 1] as usize);
        let zi = search(&self.z_index, zs, ze, q.z, reads).ok()?;
        *reads += 1;
        Some(self.value[zi])
    }

    /// Exact-match lookup.
    pub fn lookup(&self, q: QuantizedPoint) -> (Option<Rgb>, OpMetrics) {
        timed(|| {
            let mut reads = 0;
            let found = self.lookup_counted(q, &mut reads);
            (found, OpMetrics { element_reads: reads, ..OpMetrics::default() })
        })
    }

    /// Nearest stored point to `q` under Euclidean distance; ties go to the
    /// lexicographically smallest point.
    ///
    /// An exact hit returns immediately. Otherwise a seed is taken from the
    /// nearest x, then the nearest y and z inside its ranges, and its
    /// distance bounds a scan over every x entry (then y, then z) whose
    /// partial distance does not exceed the best found so far.
    pub fn nearest_neighbor(&self, q: QuantizedPoint) -> Result<(Neighbor, OpMetrics)> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(timed(|| {
            let mut reads = 0;
            let best = self.nearest_counted(q, &mut reads);
            (best, OpMetrics { element_reads: reads, ..OpMetrics::default() })
        }))
    }

    pub(crate) fn nearest_counted(&self, q: QuantizedPoint, reads: &mut u64) -> Neighbor {
        if let Some(color) = self.lookup_counted(q, reads) {
            return Neighbor {
                point: q,
                color,
                distance_squared: 0,
            };
        }

        let xi = nearest_in(&self.x_index, 0, self.x_index.len(), q.x, reads);
        *reads += 3;
        let (ys, ye) = (self.x_pointer[xi] as usize, self.x_pointer[xi + 1] as usize);
        let yi = nearest_in(&self.y_index, ys, ye, q.y, reads);
        *reads += 3;
        let (zs, ze) = (self.y_pointer[yi] as usize, self.y_pointer[yi + 1] as usize);
        let zi = nearest_in(&self.z_index, zs, ze, q.z, reads);
        *reads += 2;
        let seed = QuantizedPoint::new(self.x_index[xi], self.y_index[yi], self.z_index[zi]);
        let mut best = Neighbor {
            point: seed,
            color: self.value[zi],
            distance_squared: seed.distance_squared(q),
        };

        let start = search(&self.x_index, 0, self.x_index.len(), q.x, reads).unwrap_or_else(|i| i);
        for i in start..self.x_index.len() {
            *reads += 1;
            let d = sq(self.x_index[i], q.x);
            if d > best.distance_squared {
                break;
            }
            self.scan_x_group(i, d, q, &mut best, reads);
        }
        for i in (0..start).rev() {
            *reads += 1;
            let d = sq(self.x_index[i], q.x);
            if d > best.distance_squared {
                break;
            }
            self.scan_x_group(i, d, q, &mut best, reads);
        }
        best
    }

    fn scan_x_group(&self, xi: usize, dx2: u64, q: QuantizedPoint, best: &mut Neighbor, reads: &mut u64) {
        *reads += 2;
        let (ys, ye) = (self.x_pointer[xi] as usize, self.x_pointer[xi + 1] as usize);
        let start = search(&self.y_index, ys, ye, q.y, reads).unwrap_or_else(|i| i);
        for j in start..ye {
            *reads += 1;
            let d = dx2 + sq(self.y_index[j], q.y);
            if d > best.distance_squared {
                break;
            }
            self.scan_y_group(xi, j, d, q, best, reads);
        }
        for j in (ys..start).rev() {
            *reads += 1;
            let d = dx2 + sq(self.y_index[j], q.y);
            if d > best.distance_squared {
                break;
            }
            self.scan_y_group(xi, j, d, q, best, reads);
        }
    }

    fn scan_y_group(&self, xi: usize, yi: usize, dxy2: u64, q: QuantizedPoint, best: &mut Neighbor, reads: &mut u64) {
        *reads += 2;
        let (zs, ze) = (self.y_pointer[yi] as usize, self.y_pointer[yi + 1] as usize);
        let start = search(&self.z_index, zs, ze, q.z, reads).unwrap_or_else(|i| i);
        let (x, y) = (self.x_index[xi], self.y_index[yi]);
        let mut consider = |k: usize, reads: &mut u64| -> bool {
            *reads += 1;
            let d = dxy2 + sq(self.z_index[k], q.z);
            if d > best.distance_squared {
                return false;
            }
            let p = QuantizedPoint::new(x, y, self.z_index[k]);
            if best.beats(d, p) {
                *reads += 1;
                *best = Neighbor {
                    point: p,
                    color: self.value[k],
                    distance_squared: d,
                };
            }
            true
        };
        for k in start..ze {
            if !consider(k, reads) {
                break;
            }
        }
        for k in (zs..start).rev() {
            if !consider(k, reads) {
                break;
            }
        }
    }

    /// Nearest neighbor of every query, for strictly increasing queries.
    ///
    /// Three forward-only cursors walk the x, y and z arrays alongside the
    /// queries, so an exact hit costs only the cells the cursors pass over.
    /// A query with no exact hit falls back to
    /// [`nearest_neighbor`](Self::nearest_neighbor) without moving the
    /// cursors.
    pub(crate) fn match_sorted(&self, queries: &[QuantizedPoint], reads: &mut u64) -> Vec<Neighbor> {
        debug_assert!(queries.windows(2).all(|w| w[0] < w[1]));
        let mut out = Vec::with_capacity(queries.len());
        if self.is_empty() {
            return out;
        }
        let mut x = Lane::new(0, self.x_index.len());
        let mut y = Lane::new(0, 0);
        let mut z = Lane::new(0, 0);
        let (mut x_ptrs, mut y_ptrs) = (PointerCache::default(), PointerCache::default());
        let (mut y_owner, mut z_owner) = (usize::MAX, usize::MAX);
        for &q in queries {
            let hit = x.seek(&self.x_index, q.x, reads) && {
                if y_owner != x.pos {
                    y_owner = x.pos;
                    y.reset(x_ptrs.get(&self.x_pointer, x.pos, reads), x_ptrs.get(&self.x_pointer, x.pos + 1, reads));
                    z_owner = usize::MAX;
                }
                y.seek(&self.y_index, q.y, reads)
            } && {
                if z_owner != y.pos {
                    z_owner = y.pos;
                    z.reset(y_ptrs.get(&self.y_pointer, y.pos, reads), y_ptrs.get(&self.y_pointer, y.pos + 1, reads));
                }
                z.seek(&self.z_index, q.z, reads)
            };
            if hit {
                *reads += 1;
                out.push(Neighbor {
                    point: q,
                    color: self.value[z.pos],
                    distance_squared: 0,
                });
            } else {
                out.push(self.nearest_counted(q, reads));
            }
        }
        out
    }

    /// Union of two arrays as a single linear merge of their sorted streams.
    pub fn merge(&self, other: &CompressedGeometricArray, policy: MergePolicy) -> Result<(Self, OpMetrics)> {
        if self.qp != other.qp {
            return Err(Error::QpMismatch(self.qp, other.qp));
        }
        Ok(timed(|| {
            let mut b = Builder::new(self.qp, self.has_color || other.has_color, self.len() + other.len());
            let mut left = self.records();
            let mut right = other.records();
            let (mut l, mut r) = (left.next(), right.next());
            loop {
                let rec = match (l, r) {
                    (None, None) => break,
                    (Some(a), None) => {
                        l = left.next();
                        a
                    }
                    (None, Some(c)) => {
                        r = right.next();
                        c
                    }
                    (Some(a), Some(c)) => match a.point.cmp(&c.point) {
                        Ordering::Less => {
                            l = left.next();
                            a
                        }
                        Ordering::Greater => {
                            r = right.next();
                            c
                        }
                        Ordering::Equal => {
                            l = left.next();
                            r = right.next();
                            let color = match policy {
                                MergePolicy::BaseWins => a.color,
                                MergePolicy::Average => Rgb::average(&[a.color, c.color]),
                            };
                            PointRecord::new(a.point, color)
                        }
                    },
                };
                b.push(rec);
            }
            let merged = b.finish();
            let metrics = OpMetrics {
                element_reads: left.reads() + right.reads(),
                bytes: merged.footprint(),
                ..OpMetrics::default()
            };
            (merged, metrics)
        }))
    }

    /// Checks every structural invariant, describing the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let (x, y, k) = (self.x_index.len(), self.y_index.len(), self.z_index.len());
        if self.value.len() != k {
            return Err(format!("value length {} != z_index length {k}", self.value.len()));
        }
        if self.x_pointer.len() != x + 1 || self.y_pointer.len() != y + 1 {
            return Err("offset array length mismatch".into());
        }
        if self.x_pointer[0] != 0 || self.y_pointer[0] != 0 {
            return Err("offset arrays must start at 0".into());
        }
        if self.x_pointer[x] as usize != y || self.y_pointer[y] as usize != k {
            return Err("offset arrays must end at the next array's length".into());
        }
        if !self.x_index.windows(2).all(|w| w[0] < w[1]) {
            return Err("x_index not strictly increasing".into());
        }
        for (i, w) in self.x_pointer.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(format!("x group {i} is empty"));
            }
            if !self.y_index[w[0] as usize..w[1] as usize].windows(2).all(|p| p[0] < p[1]) {
                return Err(format!("y_index not increasing in x group {i}"));
            }
        }
        for (j, w) in self.y_pointer.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(format!("y group {j} is empty"));
            }
            if !self.z_index[w[0] as usize..w[1] as usize].windows(2).all(|p| p[0] < p[1]) {
                return Err(format!("z_index not increasing in y group {j}"));
            }
        }
        Ok(())
    }
}

/// Forward-only position inside one offset range.
struct Lane {
    pos: usize,
    end: usize,
    loaded: bool,
}

impl Lane {
    fn new(pos: usize, end: usize) -> Self {
        Lane { pos, end, loaded: false }
    }

    fn reset(&mut self, pos: u32, end: u32) {
        *self = Lane::new(pos as usize, end as usize);
    }

    /// Advances to the first entry not below `target`; true if it equals it.
    fn seek(&mut self, arr: &[u32], target: u32, reads: &mut u64) -> bool {
        while self.pos < self.end {
            if !self.loaded {
                *reads += 1;
                self.loaded = true;
            }
            let v = arr[self.pos];
            if v >= target {
                return v == target;
            }
            self.pos += 1;
            self.loaded = false;
        }
        false
    }
}

/// Remembers the last offset cell read so adjacent groups share a read.
#[derive(Default)]
struct PointerCache {
    last: Option<(usize, u32)>,
}

impl PointerCache {
    fn get(&mut self, arr: &[u32], i: usize, reads: &mut u64) -> u32 {
        match self.last {
            Some((j, v)) if j == i => v,
            _ => {
                *reads += 1;
                let v = arr[i];
                self.last = Some((i, v));
                v
            }
        }
    }
}

fn sq(a: u32, b: u32) -> u64 {
    let d = a.abs_diff(b) as u64;
    d * d
}
