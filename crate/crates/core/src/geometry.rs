//! Planar geometry in a local east/north frame.
//!
//! Headings and bearings follow the compass convention used by the robots:
//! 0° points north (+y), angles grow clockwise, so 90° points east (+x).

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::ConfigError;

/// Boundary tolerance for point-in-polygon and on-edge tests (meters).
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along a compass heading (degrees).
    pub fn from_heading(heading_deg: f64) -> Self {
        let r = heading_deg.to_radians();
        Vec2::new(r.sin(), r.cos())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product (positive when `o` is
    /// counter-clockwise of `self`).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn distance_sq(self, o: Vec2) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    /// Compass bearing of this vector in degrees, in [0, 360).
    pub fn bearing(self) -> f64 {
        normalize_heading(self.x.atan2(self.y).to_degrees())
    }

    /// Rotate clockwise by `deg` degrees (compass sense).
    pub fn rotate_cw(self, deg: f64) -> Vec2 {
        let (s, c) = deg.to_radians().sin_cos();
        Vec2::new(self.x * c + self.y * s, -self.x * s + self.y * c)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Wrap a heading into [0, 360).
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can return exactly 360.0 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Wrap an angle into [-180, 180).
pub fn wrap_signed(deg: f64) -> f64 {
    let a = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if a >= 180.0 {
        -180.0
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    /// Compass heading in degrees, [0, 360).
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose {
            position,
            heading: normalize_heading(heading),
        }
    }
}

/// Signed clockwise angle (degrees, [-180, 180)) from the observer's heading
/// to the direction of `target`. Coincident points yield 0.
pub fn relative_bearing(observer: &Pose, target: Vec2) -> f64 {
    let d = target - observer.position;
    if d.x == 0.0 && d.y == 0.0 {
        return 0.0;
    }
    wrap_signed(d.x.atan2(d.y).to_degrees() - observer.heading)
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.dot(ab);
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_properly_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    // collinear overlap also makes the polygon non-simple
    let on = |p: Vec2, q: Vec2, r: Vec2, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// A simple polygon delimiting an operating or monitoring area.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoFence {
    vertices: Vec<Vec2>,
}

impl GeoFence {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, ConfigError> {
        if vertices.len() < 3 {
            return Err(ConfigError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::InvalidPolygon("non-finite vertex".into()));
        }
        let fence = GeoFence { vertices };
        if fence.signed_area().abs() < 1e-12 {
            return Err(ConfigError::InvalidPolygon("zero area".into()));
        }
        let n = fence.vertices.len();
        for i in 0..n {
            let (a, b) = fence.edge(i);
            for j in (i + 1)..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = fence.edge(j);
                if segments_properly_intersect(a, b, c, d) {
                    return Err(ConfigError::InvalidPolygon(format!(
                        "edges {i} and {j} intersect"
                    )));
                }
            }
        }
        Ok(fence)
    }

    /// Axis-aligned rectangle with corners `min` and `max`.
    pub fn rectangle(min: Vec2, max: Vec2) -> Result<Self, ConfigError> {
        GeoFence::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        (0..self.vertices.len()).map(move |i| self.edge(i))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Vec2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// (min, max) corners of the bounding box.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn translated(&self, by: Vec2) -> GeoFence {
        GeoFence {
            vertices: self.vertices.iter().map(|&v| v + by).collect(),
        }
    }

    /// Inside-or-on-boundary test.
    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, self)
    }

    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        distance_to_fence(p, self)
    }
}

impl Serialize for GeoFence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw {
            vertices: Vec<[f64; 2]>,
        }
        Raw {
            vertices: self.vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeoFence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<[f64; 2]>,
        }
        let raw = Raw::deserialize(d)?;
        GeoFence::new(raw.vertices.into_iter().map(|[x, y]| Vec2::new(x, y)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// True iff `p` is strictly inside `fence` or on its boundary.
pub fn point_in_polygon(p: Vec2, fence: &GeoFence) -> bool {
    let mut inside = false;
    for (a, b) in fence.edges() {
        if point_segment_distance(p, a, b) <= BOUNDARY_EPS {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Minimum Euclidean distance from `p` to any edge of `fence`.
pub fn distance_to_fence(p: Vec2, fence: &GeoFence) -> f64 {
    fence
        .edges()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}
