use std::ffi::{CStr, CString};
use std::ptr;

use cga_ffi::*;

fn pt(x: u32, y: u32, z: u32, c: u8) -> CgaPoint {
    CgaPoint { x, y, z, r: c, g: c, b: c }
}

fn build(points: &[CgaPoint]) -> *mut CgaCloud {
    let mut cloud = ptr::null_mut();
    let st = unsafe { cga_cloud_build(points.as_ptr(), points.len(), 10, true, &mut cloud, ptr::null_mut()) };
    assert_eq!(st, CgaStatus::Ok);
    cloud
}

fn points(cloud: *const CgaCloud) -> Vec<CgaPoint> {
    let n = unsafe { cga_cloud_len(cloud) };
    let mut out = vec![CgaPoint::default(); n];
    let mut written = 0;
    assert_eq!(unsafe { cga_cloud_points(cloud, out.as_mut_ptr(), n, &mut written) }, CgaStatus::Ok);
    assert_eq!(written, n);
    out
}

fn last_error() -> String {
    let p = cga_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn build_lookup_nearest() {
    let input = [pt(127, 15, 158, 1), pt(127, 14, 157, 2), pt(127, 15, 157, 3), pt(126, 15, 157, 4)];
    let mut m = CgaMetrics::default();
    let mut cloud = ptr::null_mut();
    assert_eq!(unsafe { cga_cloud_build(input.as_ptr(), input.len(), 10, true, &mut cloud, &mut m) }, CgaStatus::Ok);
    assert!(m.element_reads > 0);
    assert_eq!(unsafe { cga_cloud_len(cloud) }, 4);
    assert!(unsafe { cga_cloud_footprint(cloud) } > 0);

    let stored = points(cloud);
    assert!(stored.windows(2).all(|w| (w[0].x, w[0].y, w[0].z) < (w[1].x, w[1].y, w[1].z)));

    let mut found = CgaPoint::default();
    assert_eq!(unsafe { cga_cloud_lookup(cloud, 127, 15, 157, &mut found, ptr::null_mut()) }, CgaStatus::Ok);
    assert_eq!(found, pt(127, 15, 157, 3));
    assert_eq!(unsafe { cga_cloud_lookup(cloud, 0, 0, 0, &mut found, ptr::null_mut()) }, CgaStatus::NotFound);
    assert!(last_error().contains("not stored"));

    let mut d2 = u64::MAX;
    assert_eq!(unsafe { cga_cloud_nearest(cloud, 127, 16, 158, &mut found, &mut d2, &mut m) }, CgaStatus::Ok);
    assert_eq!((found, d2), (pt(127, 15, 158, 1), 1));
    assert!(cga_last_error().is_null());
    unsafe { cga_cloud_free(cloud) };
}

#[test]
fn merge_policies() {
    let a = build(&[pt(1, 1, 1, 10), pt(2, 2, 2, 20)]);
    let b = build(&[pt(2, 2, 2, 40), pt(3, 3, 3, 30)]);
    for (average, shared) in [(false, 20u8), (true, 30)] {
        let mut merged = ptr::null_mut();
        assert_eq!(unsafe { cga_cloud_merge(a, b, average, &mut merged, ptr::null_mut()) }, CgaStatus::Ok);
        assert_eq!(points(merged), vec![pt(1, 1, 1, 10), pt(2, 2, 2, shared), pt(3, 3, 3, 30)]);
        unsafe { cga_cloud_free(merged) };
    }
    unsafe {
        cga_cloud_free(a);
        cga_cloud_free(b);
    }
}

#[test]
fn encode_decode_frames() {
    let sheet = |dx: u32| -> Vec<CgaPoint> {
        (0..16u32)
            .flat_map(|i| (0..16u32).map(move |j| pt(20 + i + dx, 30 + j, 40 + (i * j) / 16, (i * 8 + j * 4) as u8)))
            .collect()
    };
    let f0 = build(&sheet(0));
    let f1 = build(&sheet(2));
    let handles = [f0 as *const CgaCloud, f1 as *const CgaCloud];
    let mut buf = CgaBuffer { data: ptr::null_mut(), len: 0 };
    assert_eq!(unsafe { cga_encode(handles.as_ptr(), 2, 1, &mut buf) }, CgaStatus::Ok);
    assert!(buf.len > 0);
    let mut count = 0;
    assert_eq!(unsafe { cga_stream_frame_count(buf.data, buf.len, &mut count) }, CgaStatus::Ok);
    assert_eq!(count, 2);
    for (i, &original) in handles.iter().enumerate() {
        let mut decoded = ptr::null_mut();
        assert_eq!(unsafe { cga_decode_frame(buf.data, buf.len, i, &mut decoded) }, CgaStatus::Ok);
        let (a, b) = (points(original), points(decoded));
        assert!(a.iter().zip(&b).all(|(p, q)| (p.x, p.y, p.z) == (q.x, q.y, q.z)));
        assert!(a.iter().zip(&b).all(|(p, q)| p.r.abs_diff(q.r) <= 1));
        unsafe { cga_cloud_free(decoded) };
    }
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { cga_decode_frame(buf.data, buf.len, 2, &mut none) }, CgaStatus::InvalidArgument);
    assert_eq!(unsafe { cga_decode_frame(buf.data, buf.len - 1, 0, &mut none) }, CgaStatus::MalformedInput);
    assert!(none.is_null());
    unsafe {
        cga_buffer_free(&mut buf);
        cga_cloud_free(f0);
        cga_cloud_free(f1);
    }
    assert!(buf.data.is_null() && buf.len == 0);
}

#[test]
fn load_and_write_ply() {
    let path = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/single.ply")).unwrap();
    let mut cloud = ptr::null_mut();
    assert_eq!(unsafe { cga_cloud_load(path.as_ptr(), 10, &mut cloud) }, CgaStatus::Ok);
    assert_eq!(points(cloud), vec![CgaPoint { x: 40, y: 50, z: 60, r: 200, g: 100, b: 50 }]);
    let mut buf = CgaBuffer { data: ptr::null_mut(), len: 0 };
    assert_eq!(unsafe { cga_cloud_to_ply(cloud, false, &mut buf) }, CgaStatus::Ok);
    let text = unsafe { std::slice::from_raw_parts(buf.data, buf.len) };
    assert!(text.starts_with(b"ply\nformat ascii 1.0\n"));
    assert!(text.ends_with(b"40 50 60 200 100 50\n"));
    unsafe {
        cga_buffer_free(&mut buf);
        cga_cloud_free(cloud);
    }

    let missing = CString::new("/nonexistent/cloud.ply").unwrap();
    assert_eq!(unsafe { cga_cloud_load(missing.as_ptr(), 10, &mut cloud) }, CgaStatus::Io);
    assert!(last_error().contains("/nonexistent/cloud.ply"));
}

#[test]
fn invalid_arguments() {
    let mut cloud = ptr::null_mut();
    let p = [pt(1024, 0, 0, 0)];
    assert_eq!(unsafe { cga_cloud_build(p.as_ptr(), 1, 10, false, &mut cloud, ptr::null_mut()) }, CgaStatus::CoordinateOutOfRange);
    assert_eq!(unsafe { cga_cloud_build(p.as_ptr(), 1, 0, false, &mut cloud, ptr::null_mut()) }, CgaStatus::QpOutOfRange);
    assert_eq!(unsafe { cga_cloud_build(ptr::null(), 3, 10, false, &mut cloud, ptr::null_mut()) }, CgaStatus::NullPointer);
    assert_eq!(unsafe { cga_cloud_build(p.as_ptr(), 1, 10, false, ptr::null_mut(), ptr::null_mut()) }, CgaStatus::NullPointer);
    assert!(cloud.is_null());

    let empty = build(&[]);
    let mut found = CgaPoint::default();
    assert_eq!(unsafe { cga_cloud_nearest(empty, 1, 2, 3, &mut found, ptr::null_mut(), ptr::null_mut()) }, CgaStatus::EmptyInput);
    let mut written = 7;
    assert_eq!(unsafe { cga_cloud_points(empty, ptr::null_mut(), 0, &mut written) }, CgaStatus::Ok);
    assert_eq!(written, 0);
    assert_eq!(unsafe { cga_cloud_len(ptr::null()) }, 0);
    unsafe {
        cga_cloud_free(empty);
        cga_cloud_free(ptr::null_mut());
        cga_buffer_free(ptr::null_mut());
    }
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cga.h")).unwrap();
    for name in ["typedef struct CgaCloud CgaCloud;", "CGA_STATUS_NOT_FOUND = 9", "cga_cloud_nearest(", "cga_decode_frame(", "cga_buffer_free("] {
        assert!(header.contains(name), "{name}");
    }
}
