//! C ABI over `cga-core`.
//!
//! Clouds are opaque `CgaCloud` handles created by the library and released
//! with `cga_cloud_free`. Every fallible call returns a `CgaStatus`; on
//! failure a message is kept per thread and can be read with
//! `cga_last_error`. Byte buffers handed out by the library are released
//! with `cga_buffer_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cga_core::codec::{decode_sequence, encode_sequence, split_frames, write_container};
use cga_core::io::{load_cloud, write_ply, PlyFormat};
use cga_core::{CompressedGeometricArray, Error, MergePolicy, PointRecord, PointSoup, QuantizedPoint, Rgb};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EmptyInput = 3,
    QpOutOfRange = 4,
    CoordinateOutOfRange = 5,
    QpMismatch = 6,
    MalformedInput = 7,
    Io = 8,
    NotFound = 9,
    Panic = 10,
}

/// A voxel with its color.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CgaPoint {
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

/// Cost counters of one operation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CgaMetrics {
    pub wall_ns: u64,
    pub element_reads: u64,
    pub node_hops: u64,
    pub bytes: u64,
}

/// Bytes owned by the library.
#[repr(C)]
#[derive(Debug)]
pub struct CgaBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// Opaque cloud stored as a compressed geometric array.
pub struct CgaCloud {
    cga: CompressedGeometricArray,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CgaStatus {
    match e {
        Error::EmptyInput => CgaStatus::EmptyInput,
        Error::QpOutOfRange(_) => CgaStatus::QpOutOfRange,
        Error::CoordinateOutOfRange { .. } => CgaStatus::CoordinateOutOfRange,
        Error::QpMismatch(..) => CgaStatus::QpMismatch,
        Error::InvalidArgument(_) | Error::UndefinedSimilarity | Error::PointAtEye => CgaStatus::InvalidArgument,
        Error::Ply(_)
        | Error::PlyUnsupportedProperty { .. }
        | Error::PlyCountMismatch { .. }
        | Error::Bitstream(_)
        | Error::TruncatedOccupancy
        | Error::EmptyOccupancyCode
        | Error::Csv(_) => CgaStatus::MalformedInput,
        Error::Io { .. } | Error::Stream(_) => CgaStatus::Io,
    }
}

struct Failure(CgaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CgaStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CgaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CgaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CgaStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn to_point(p: &CgaPoint) -> QuantizedPoint {
    QuantizedPoint::new(p.x, p.y, p.z)
}

fn from_record(r: &PointRecord) -> CgaPoint {
    CgaPoint {
        x: r.point.x,
        y: r.point.y,
        z: r.point.z,
        r: r.color.r,
        g: r.color.g,
        b: r.color.b,
    }
}

fn metrics(m: cga_core::OpMetrics) -> CgaMetrics {
    CgaMetrics {
        wall_ns: m.wall_ns,
        element_reads: m.element_reads,
        node_hops: m.node_hops,
        bytes: m.bytes,
    }
}

fn write_metrics(dst: *mut CgaMetrics, m: cga_core::OpMetrics) {
    if let Some(d) = unsafe { dst.as_mut() } {
        *d = metrics(m);
    }
}

fn hand_out(cloud: CgaCloud, dst: &mut *mut CgaCloud) {
    *dst = Box::into_raw(Box::new(cloud));
}

fn buffer(bytes: Vec<u8>) -> CgaBuffer {
    let mut boxed = bytes.into_boxed_slice();
    let len = boxed.len();
    let data = if len == 0 { ptr::null_mut() } else { boxed.as_mut_ptr() };
    std::mem::forget(boxed);
    CgaBuffer { data, len }
}

fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    let s = unsafe { as_ref(p, "path")? };
    let s = unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure(CgaStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cga_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a cloud from `len` points at bit depth `qp`. Duplicate
/// coordinates are merged with their colors averaged.
///
/// # Safety
/// `points` must reference `len` readable values; `out_cloud` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_build(
    points: *const CgaPoint,
    len: usize,
    qp: u8,
    has_color: bool,
    out_cloud: *mut *mut CgaCloud,
    out_metrics: *mut CgaMetrics,
) -> CgaStatus {
    guard(|| {
        let dst = unsafe { out(out_cloud, "out_cloud")? };
        let pts = unsafe { slice(points, len, "points")? };
        let recs = pts.iter().map(|p| PointRecord::new(to_point(p), Rgb::new(p.r, p.g, p.b))).collect();
        let soup = PointSoup::from_records(recs, qp, has_color)?;
        let (cga, m) = CompressedGeometricArray::build(&soup);
        write_metrics(out_metrics, m);
        hand_out(CgaCloud { cga }, dst);
        Ok(())
    })
}

/// Loads a `.ply` or text xyz file and voxelizes it at bit depth `qp`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_cloud` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_load(path: *const c_char, qp: u8, out_cloud: *mut *mut CgaCloud) -> CgaStatus {
    guard(|| {
        let dst = unsafe { out(out_cloud, "out_cloud")? };
        let soup = load_cloud(path_arg(path)?, qp)?;
        hand_out(CgaCloud { cga: CompressedGeometricArray::from_soup(&soup) }, dst);
        Ok(())
    })
}

/// Releases a cloud. Null is ignored.
///
/// # Safety
/// `cloud` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_free(cloud: *mut CgaCloud) {
    if !cloud.is_null() {
        drop(unsafe { Box::from_raw(cloud) });
    }
}

/// Number of stored points; 0 for null.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_len(cloud: *const CgaCloud) -> usize {
    unsafe { cloud.as_ref() }.map_or(0, |c| c.cga.len())
}

/// Storage footprint in bytes; 0 for null.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_footprint(cloud: *const CgaCloud) -> u64 {
    unsafe { cloud.as_ref() }.map_or(0, |c| c.cga.footprint())
}

/// Copies up to `capacity` points in lexicographic order into `dst` and
/// stores the number written in `out_written`.
///
/// # Safety
/// `dst` must have room for `capacity` points.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_points(
    cloud: *const CgaCloud,
    dst: *mut CgaPoint,
    capacity: usize,
    out_written: *mut usize,
) -> CgaStatus {
    guard(|| {
        let c = unsafe { as_ref(cloud, "cloud")? };
        let written = unsafe { out(out_written, "out_written")? };
        if capacity > 0 && dst.is_null() {
            return Err(null("dst"));
        }
        let mut n = 0;
        for r in c.cga.records().take(capacity) {
            unsafe { dst.add(n).write(from_record(&r)) };
            n += 1;
        }
        *written = n;
        Ok(())
    })
}

/// Exact lookup. Returns `NotFound` when the coordinate is absent; on
/// success the stored color is written into `out_point`.
///
/// # Safety
/// Pointers must be valid; `out_metrics` may be null.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_lookup(
    cloud: *const CgaCloud,
    x: u32,
    y: u32,
    z: u32,
    out_point: *mut CgaPoint,
    out_metrics: *mut CgaMetrics,
) -> CgaStatus {
    guard(|| {
        let c = unsafe { as_ref(cloud, "cloud")? };
        let dst = unsafe { out(out_point, "out_point")? };
        let q = QuantizedPoint::new(x, y, z);
        let (found, m) = c.cga.lookup(q);
        write_metrics(out_metrics, m);
        let color = found.ok_or_else(|| Failure(CgaStatus::NotFound, format!("{q} is not stored")))?;
        *dst = from_record(&PointRecord::new(q, color));
        Ok(())
    })
}

/// Nearest stored point to `(x, y, z)`; ties go to the lexicographically
/// smaller point.
///
/// # Safety
/// Pointers must be valid; `out_distance_squared` and `out_metrics` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_nearest(
    cloud: *const CgaCloud,
    x: u32,
    y: u32,
    z: u32,
    out_point: *mut CgaPoint,
    out_distance_squared: *mut u64,
    out_metrics: *mut CgaMetrics,
) -> CgaStatus {
    guard(|| {
        let c = unsafe { as_ref(cloud, "cloud")? };
        let dst = unsafe { out(out_point, "out_point")? };
        let (n, m) = c.cga.nearest_neighbor(QuantizedPoint::new(x, y, z))?;
        *dst = from_record(&PointRecord::new(n.point, n.color));
        if let Some(d) = unsafe { out_distance_squared.as_mut() } {
            *d = n.distance_squared;
        }
        write_metrics(out_metrics, m);
        Ok(())
    })
}

/// Union of two clouds. With `average` false the colors of `base` win on
/// shared coordinates; otherwise the two colors are averaged.
///
/// # Safety
/// Pointers must be valid; `out_metrics` may be null.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_merge(
    base: *const CgaCloud,
    other: *const CgaCloud,
    average: bool,
    out_cloud: *mut *mut CgaCloud,
    out_metrics: *mut CgaMetrics,
) -> CgaStatus {
    guard(|| {
        let a = unsafe { as_ref(base, "base")? };
        let b = unsafe { as_ref(other, "other")? };
        let dst = unsafe { out(out_cloud, "out_cloud")? };
        let policy = if average { MergePolicy::Average } else { MergePolicy::BaseWins };
        let (cga, m) = a.cga.merge(&b.cga, policy)?;
        write_metrics(out_metrics, m);
        hand_out(CgaCloud { cga }, dst);
        Ok(())
    })
}

/// Serializes a cloud as PLY, binary little-endian when `binary` is set.
///
/// # Safety
/// Pointers must be valid. Release the buffer with `cga_buffer_free`.
#[no_mangle]
pub unsafe extern "C" fn cga_cloud_to_ply(cloud: *const CgaCloud, binary: bool, out_buffer: *mut CgaBuffer) -> CgaStatus {
    guard(|| {
        let c = unsafe { as_ref(cloud, "cloud")? };
        let dst = unsafe { out(out_buffer, "out_buffer")? };
        let format = if binary { PlyFormat::BinaryLittleEndian } else { PlyFormat::Ascii };
        *dst = buffer(write_ply(&c.cga.to_soup(), format));
        Ok(())
    })
}

/// Encodes `count` clouds as one container stream. The first frame is intra
/// coded and the rest predict from their decoded predecessor.
///
/// # Safety
/// `clouds` must reference `count` live handles. Release the buffer with
/// `cga_buffer_free`.
#[no_mangle]
pub unsafe extern "C" fn cga_encode(
    clouds: *const *const CgaCloud,
    count: usize,
    step: u16,
    out_buffer: *mut CgaBuffer,
) -> CgaStatus {
    guard(|| {
        let dst = unsafe { out(out_buffer, "out_buffer")? };
        let handles = unsafe { slice(clouds, count, "clouds")? };
        let soups = handles
            .iter()
            .map(|&h| unsafe { as_ref(h, "cloud") }.map(|c| c.cga.to_soup()))
            .collect::<Result<Vec<_>, _>>()?;
        *dst = buffer(write_container(&encode_sequence(&soups, step)?));
        Ok(())
    })
}

/// Number of frames in a container stream.
///
/// # Safety
/// `data` must reference `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cga_stream_frame_count(data: *const u8, len: usize, out_count: *mut usize) -> CgaStatus {
    guard(|| {
        let dst = unsafe { out(out_count, "out_count")? };
        *dst = split_frames(unsafe { slice(data, len, "data")? })?.len();
        Ok(())
    })
}

/// Decodes frame `index` of a container stream. Earlier frames are decoded
/// as needed for prediction.
///
/// # Safety
/// `data` must reference `len` readable bytes; `out_cloud` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cga_decode_frame(data: *const u8, len: usize, index: usize, out_cloud: *mut *mut CgaCloud) -> CgaStatus {
    guard(|| {
        let dst = unsafe { out(out_cloud, "out_cloud")? };
        let frames = split_frames(unsafe { slice(data, len, "data")? })?;
        if index >= frames.len() {
            return Err(Failure(
                CgaStatus::InvalidArgument,
                format!("frame {index} requested from a stream of {}", frames.len()),
            ));
        }
        let decoded = decode_sequence(&frames[..=index])?;
        hand_out(CgaCloud { cga: CompressedGeometricArray::from_soup(&decoded[index]) }, dst);
        Ok(())
    })
}

/// Releases a buffer returned by the library and resets it to empty.
///
/// # Safety
/// `buffer` must be null or hold a buffer produced by this library.
#[no_mangle]
pub unsafe extern "C" fn cga_buffer_free(buffer: *mut CgaBuffer) {
    let Some(b) = (unsafe { buffer.as_mut() }) else { return };
    if !b.data.is_null() {
        drop(unsafe { Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)) });
    }
    b.data = ptr::null_mut();
    b.len = 0;
}
