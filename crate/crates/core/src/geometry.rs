//! Distance metrics, 3D to 2D projections, and point rasterization.

use std::io::Write;

use crate::cga::CompressedGeometricArray;
use crate::error::{Error, Result};
use crate::metrics::{timed, OpMetrics};
use crate::types::{QuantizedPoint, Rgb};

fn to_f64(p: QuantizedPoint) -> [f64; 3] {
    [p.x as f64, p.y as f64, p.z as f64]
}

pub fn euclidean_distance(a: QuantizedPoint, b: QuantizedPoint) -> f64 {
    (a.distance_squared(b) as f64).sqrt()
}

/// Displacement normalized by the combined squared magnitude of both
/// points: `sqrt(|a - b|^2 / (|a|^2 + |b|^2))`.
pub fn normalized_similarity(a: QuantizedPoint, b: QuantizedPoint) -> Result<f64> {
    let [ax, ay, az] = to_f64(a);
    let [bx, by, bz] = to_f64(b);
    let denom = ax * ax + bx * bx + ay * ay + by * by + az * az + bz * bz;
    if denom == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((a.distance_squared(b) as f64 / denom).sqrt())
}

/// A point on the projection plane. `depth` is the z value before any
/// perspective division and drives z-buffering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Orthogonal projection along z with per-axis scaling.
pub fn project_orthogonal(p: [f64; 3], mx: f64, my: f64) -> ProjectedPoint {
    ProjectedPoint {
        u: mx * p[0],
        v: my * p[1],
        depth: p[2],
    }
}

/// Perspective projection onto the plane at distance `d`:
/// `(x * d / z, y * d / z)`.
pub fn project_perspective(p: [f64; 3], d: f64) -> Result<ProjectedPoint> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::InvalidArgument(format!("perspective distance must be positive, got {d}")));
    }
    if p[2] == 0.0 {
        return Err(Error::PointAtEye);
    }
    Ok(ProjectedPoint {
        u: p[0] * d / p[2],
        v: p[1] * d / p[2],
        depth: p[2],
    })
}

/// Rotation by `theta` radians about the y axis:
/// `(cos t * x - sin t * z, y, sin t * x + cos t * z)`.
pub fn rotate_y(p: [f64; 3], theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [c * p[0] - s * p[2], p[1], s * p[0] + c * p[2]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Orthogonal { mx: f64, my: f64 },
    Perspective { d: f64 },
}

/// A projection preceded by an optional rotation about the y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewTransform {
    pub rotate_y: f64,
    pub projection: Projection,
}

impl ViewTransform {
    pub fn orthogonal(mx: f64, my: f64) -> Self {
        ViewTransform {
            rotate_y: 0.0,
            projection: Projection::Orthogonal { mx, my },
        }
    }

    pub fn perspective(d: f64) -> Self {
        ViewTransform {
            rotate_y: 0.0,
            projection: Projection::Perspective { d },
        }
    }

    pub fn rotated(self, theta: f64) -> Self {
        ViewTransform { rotate_y: theta, ..self }
    }

    pub fn apply(&self, p: QuantizedPoint) -> Result<ProjectedPoint> {
        let mut v = to_f64(p);
        if self.rotate_y != 0.0 {
            v = rotate_y(v, self.rotate_y);
        }
        match self.projection {
            Projection::Orthogonal { mx, my } => Ok(project_orthogonal(v, mx, my)),
            Projection::Perspective { d } => project_perspective(v, d),
        }
    }
}

/// Raster target with a depth buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    width: usize,
    height: usize,
    pixels: Vec<Option<Rgb>>,
    depth: Vec<f64>,
}

impl ViewImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("image size {width}x{height} is empty")));
        }
        Ok(ViewImage {
            width,
            height,
            pixels: vec![None; width * height],
            depth: vec![f64::INFINITY; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, col: usize, row: usize) -> Option<Rgb> {
        self.pixels[row * self.width + col]
    }

    pub fn depth_at(&self, col: usize, row: usize) -> Option<f64> {
        self.pixel(col, row).map(|_| self.depth[row * self.width + col])
    }

    /// Coordinates of every set pixel, row-major.
    pub fn set_pixels(&self) -> Vec<(usize, usize, Rgb)> {
        self.pixels
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|c| (i % self.width, i / self.width, c)))
            .collect()
    }

    /// Writes the nearer fragment; equal depths keep the earlier one.
    fn plot(&mut self, col: usize, row: usize, depth: f64, color: Rgb) {
        let i = row * self.width + col;
        if depth < self.depth[i] {
            self.depth[i] = depth;
            self.pixels[i] = Some(color);
        }
    }

    /// Binary PPM (P6); unset pixels are black.
    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.pixels.len() * 3);
        for p in &self.pixels {
            buf.extend_from_slice(&p.unwrap_or_default().channels());
        }
        out.write_all(&buf)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_ppm(&mut v).expect("writing to a Vec cannot fail");
        v
    }
}

/// Maps projected coordinates onto pixels.
///
/// The projected bounding rectangle is scaled uniformly by
/// `min((W-1)/span_u, (H-1)/span_v)` (a zero span imposes no limit; both
/// zero gives scale 0) and centered. Column `round(off_u + (u - u_min) * s)`,
/// row `round(off_v + (v_max - v) * s)` so that +v points up, where
/// `off = ((W-1) - span * s) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterMapping {
    u_min: f64,
    v_max: f64,
    scale: f64,
    off_u: f64,
    off_v: f64,
}

impl RasterMapping {
    pub fn fit(points: &[ProjectedPoint], width: usize, height: usize) -> Self {
        let (mut u_min, mut u_max, mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            u_min = u_min.min(p.u);
            u_max = u_max.max(p.u);
            v_min = v_min.min(p.v);
            v_max = v_max.max(p.v);
        }
        if points.is_empty() {
            (u_min, u_max, v_min, v_max) = (0.0, 0.0, 0.0, 0.0);
        }
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        let (su, sv) = (u_max - u_min, v_max - v_min);
        // spans below this are rounding noise from rotations
        const FLAT: f64 = 1e-9;
        let su = if su > FLAT { su } else { 0.0 };
        let sv = if sv > FLAT { sv } else { 0.0 };
        let limit = |room: f64, span: f64| if span > 0.0 { room / span } else { f64::INFINITY };
        let mut scale = limit(w, su).min(limit(h, sv));
        if !scale.is_finite() {
            scale = 0.0;
        }
        RasterMapping {
            u_min,
            v_max,
            scale,
            off_u: (w - su * scale) / 2.0,
            off_v: (h - sv * scale) / 2.0,
        }
    }

    pub fn pixel(&self, p: &ProjectedPoint) -> (usize, usize) {
        let col = (self.off_u + (p.u - self.u_min) * self.scale).round();
        let row = (self.off_v + (self.v_max - p.v) * self.scale).round();
        (col.max(0.0) as usize, row.max(0.0) as usize)
    }
}

/// Projects every point of the array once, in storage order, and
/// rasterizes with a z-buffer (smallest depth wins). Points projecting
/// through the eye plane are skipped. Uncolored clouds render white.
pub fn render_view(cloud: &CompressedGeometricArray, transform: ViewTransform, width: usize, height: usize) -> Result<(ViewImage, OpMetrics)> {
    let mut image = ViewImage::new(width, height)?;
    if let Projection::Perspective { d } = transform.projection {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::InvalidArgument(format!("perspective distance must be positive, got {d}")));
        }
    }
    Ok(timed(|| {
        let mut records = cloud.records();
        let mut projected = Vec::with_capacity(cloud.len());
        for rec in records.by_ref() {
            if let Ok(p) = transform.apply(rec.point) {
                let color = if cloud.has_color() { rec.color } else { Rgb::WHITE };
                projected.push((p, color));
            }
        }
        let reads = records.reads();
        let only_points: Vec<_> = projected.iter().map(|(p, _)| *p).collect();
        let mapping = RasterMapping::fit(&only_points, width, height);
        for (p, color) in &projected {
            let (col, row) = mapping.pixel(p);
            image.plot(col.min(width - 1), row.min(height - 1), p.depth, *color);
        }
        let metrics = OpMetrics {
            element_reads: reads + projected.len() as u64,
            ..OpMetrics::default()
        };
        (image, metrics)
    }))
}
