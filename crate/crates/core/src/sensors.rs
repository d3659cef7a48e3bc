//! Controller inputs: waypoint, robot and geo-fence sensors.
//!
//! Input ordering (fixed, 11 values, all in [0, 1]):
//!
//! | index | value |
//! |-------|-------|
//! | 0 | waypoint relative angle, `(bearing + 180) / 360` |
//! | 1 | waypoint distance, `min(d, cap) / cap` |
//! | 2..=5 | closest neighbour per slice: front, right, back, left |
//! | 6..=9 | closest fence boundary per slice: front, right, back, left |
//! | 10 | 1 if inside the fence, else 0 |
//!
//! Slices are 90° wide, the front slice centred on the heading. A slice with
//! nothing in range reads 1. Without a waypoint both waypoint inputs read 0;
//! without a fence the fence inputs read 1 and the inside flag reads 1.

use serde::{Deserialize, Serialize};

use crate::geometry::{point_in_polygon, point_segment_distance, relative_bearing, GeoFence, Pose, Vec2};
use crate::sim::WorldState;

pub const INPUT_COUNT: usize = 11;
pub const SLICES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub robot_range: f64,
    pub fence_range: f64,
    pub waypoint_distance_cap: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            robot_range: 40.0,
            fence_range: 40.0,
            waypoint_distance_cap: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame(pub [f64; INPUT_COUNT]);

impl SensorFrame {
    pub fn new(waypoint: (f64, f64), robots: [f64; SLICES], fence: [f64; SLICES], inside: bool) -> Self {
        let mut v = [0.0; INPUT_COUNT];
        v[0] = waypoint.0;
        v[1] = waypoint.1;
        v[2..6].copy_from_slice(&robots);
        v[6..10].copy_from_slice(&fence);
        v[10] = if inside { 1.0 } else { 0.0 };
        SensorFrame(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn waypoint_angle(&self) -> f64 {
        self.0[0]
    }

    pub fn waypoint_distance(&self) -> f64 {
        self.0[1]
    }

    pub fn robot_slices(&self) -> &[f64] {
        &self.0[2..6]
    }

    pub fn fence_slices(&self) -> &[f64] {
        &self.0[6..10]
    }

    pub fn inside(&self) -> f64 {
        self.0[10]
    }
}

/// Slice index (0 front, 1 right, 2 back, 3 left) of a relative bearing.
pub fn slice_of(relative_deg: f64) -> usize {
    (((relative_deg + 45.0).rem_euclid(360.0) / 90.0) as usize).min(SLICES - 1)
}

pub fn waypoint_sensor(pose: &Pose, waypoint: Option<Vec2>, cfg: &SensorConfig) -> (f64, f64) {
    let Some(wp) = waypoint else {
        return (0.0, 0.0);
    };
    let angle = (relative_bearing(pose, wp) + 180.0) / 360.0;
    let cap = cfg.waypoint_distance_cap;
    let dist = pose.position.distance(wp).min(cap) / cap;
    (angle, dist)
}

pub fn robot_sensor<I>(pose: &Pose, neighbours: I, cfg: &SensorConfig) -> [f64; SLICES]
where
    I: IntoIterator<Item = Vec2>,
{
    let range = cfg.robot_range;
    let mut closest = [range; SLICES];
    for n in neighbours {
        let d = pose.position.distance(n);
        if d >= range {
            continue;
        }
        let s = slice_of(relative_bearing(pose, n));
        closest[s] = closest[s].min(d);
    }
    closest.map(|d| d / range)
}

/// Clip `[a, b]` to the half-plane `{q : sign * cross(dir, q - apex) >= 0}`.
fn clip_halfplane(a: Vec2, b: Vec2, t0: &mut f64, t1: &mut f64, apex: Vec2, dir: Vec2, sign: f64) {
    let fa = sign * dir.cross(a - apex);
    let fb = sign * dir.cross(b - apex);
    // f(t) = fa + t (fb - fa) >= 0
    let slope = fb - fa;
    if slope == 0.0 {
        if fa < 0.0 {
            *t0 = 1.0;
            *t1 = 0.0;
        }
        return;
    }
    let root = -fa / slope;
    if slope > 0.0 {
        *t0 = t0.max(root);
    } else {
        *t1 = t1.min(root);
    }
}

/// Per-slice distance to the fence boundary plus the inside flag.
///
/// Each edge is clipped exactly to the 90° wedge of a slice before taking the
/// point-segment distance, so there is no discretisation error.
pub fn geofence_sensor(pose: &Pose, fence: Option<&GeoFence>, cfg: &SensorConfig) -> ([f64; SLICES], bool) {
    let Some(fence) = fence else {
        return ([1.0; SLICES], true);
    };
    let p = pose.position;
    let range = cfg.fence_range;
    let mut closest = [range; SLICES];
    let bounds: [Vec2; SLICES + 1] =
        std::array::from_fn(|k| Vec2::from_heading(pose.heading - 45.0 + 90.0 * k as f64));
    for (a, b) in fence.edges() {
        if point_segment_distance(p, a, b) >= range {
            continue;
        }
        for s in 0..SLICES {
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            // clockwise of the slice's first bound, counter-clockwise of its second
            clip_halfplane(a, b, &mut t0, &mut t1, p, bounds[s], -1.0);
            clip_halfplane(a, b, &mut t0, &mut t1, p, bounds[s + 1], 1.0);
            if t0 > t1 {
                continue;
            }
            let ab = b - a;
            let d = point_segment_distance(p, a + ab * t0, a + ab * t1);
            closest[s] = closest[s].min(d);
        }
    }
    (closest.map(|d| d / range), point_in_polygon(p, fence))
}

/// Full input frame for robot `index`, built from its own sensed pose and the
/// broadcast ledger (never from neighbours' true positions).
pub fn sense(world: &WorldState, index: usize, cfg: &SensorConfig) -> SensorFrame {
    let me = &world.robots()[index];
    let pose = me.sensed;
    let neighbours = world
        .ledger()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, e)| e.position);
    let wp = waypoint_sensor(&pose, world.active_waypoint(), cfg);
    let robots = robot_sensor(&pose, neighbours, cfg);
    let (fence, inside) = geofence_sensor(&pose, world.fence.as_ref(), cfg);
    SensorFrame::new(wp, robots, fence, inside)
}
