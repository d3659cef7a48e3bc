//! Task scoring over recorded trajectories.
//!
//! Every function here is a pure function of a [`TrajectoryTrace`], so a trial
//! can be re-scored from its log.

use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageGrid, CoverageParams};
use crate::error::FitnessError;
use crate::geometry::{GeoFence, Vec2};

/// Distance below which the safety coefficient starts penalising (m).
pub const SAFETY_DISTANCE: f64 = 3.0;
pub const SAFETY_FLOOR: f64 = 0.1;
/// Two robots closer than this belong to the same cluster (m).
pub const CLUSTER_THRESHOLD: f64 = 7.0;
/// Dispersion target: half the 40 m communication range.
pub const DISPERSION_TARGET: f64 = 20.0;
/// Homing start distances are floored at this value (m).
pub const MIN_STARTING_DISTANCE: f64 = 1.0;

/// Per-step robot positions of one trial with the metadata needed to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTrace {
    /// Positions before the first step.
    pub initial: Vec<Vec2>,
    /// `positions[t]` holds every robot after step `t + 1`.
    pub positions: Vec<Vec<Vec2>>,
    /// Minimum pairwise distance after each step (infinite with one robot).
    pub pair_min_dist: Vec<f64>,
    pub waypoints: Vec<Vec2>,
    /// Index into `waypoints` active during each step.
    pub active_waypoint: Vec<usize>,
    pub fence: Option<GeoFence>,
    pub target_dist: f64,
}

pub fn min_pairwise_distance(points: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min(a.distance_sq(*b));
        }
    }
    best.sqrt()
}

impl TrajectoryTrace {
    pub fn new(initial: Vec<Vec2>) -> Self {
        TrajectoryTrace {
            initial,
            positions: Vec::new(),
            pair_min_dist: Vec::new(),
            waypoints: Vec::new(),
            active_waypoint: Vec::new(),
            fence: None,
            target_dist: DISPERSION_TARGET,
        }
    }

    pub fn push_step(&mut self, positions: Vec<Vec2>, active_waypoint: usize) {
        debug_assert_eq!(positions.len(), self.initial.len());
        self.pair_min_dist.push(min_pairwise_distance(&positions));
        self.positions.push(positions);
        self.active_waypoint.push(active_waypoint);
    }

    /// T
    pub fn steps(&self) -> usize {
        self.positions.len()
    }

    /// R
    pub fn robots(&self) -> usize {
        self.initial.len()
    }

    /// Smallest distance between any two robots over the whole trial.
    pub fn min_distance(&self) -> f64 {
        self.pair_min_dist.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check(&self) -> Result<(), FitnessError> {
        if self.steps() == 0 || self.robots() == 0 {
            Err(FitnessError::EmptyTrace)
        } else {
            Ok(())
        }
    }
}

/// `S = 0.1 + min(3, max(0, minDist)) / 3 * 0.9`; 1 for a single robot.
pub fn safety_from_distance(min_dist: f64) -> f64 {
    if min_dist.is_infinite() {
        return 1.0;
    }
    SAFETY_FLOOR + min_dist.max(0.0).min(SAFETY_DISTANCE) / SAFETY_DISTANCE * (1.0 - SAFETY_FLOOR)
}

pub fn safety_coefficient(trace: &TrajectoryTrace) -> f64 {
    if trace.robots() < 2 {
        return 1.0;
    }
    safety_from_distance(trace.min_distance())
}

/// Mean relative progress toward the active waypoint, times S.
///
/// Starting distances are re-based to the positions held when a waypoint
/// becomes active and floored at 1 m. Moving away yields negative terms.
pub fn homing_fitness(trace: &TrajectoryTrace) -> Result<f64, FitnessError> {
    trace.check()?;
    if trace.waypoints.is_empty() {
        return Err(FitnessError::MissingWaypoint);
    }
    let r = trace.robots();
    let mut starting = vec![0.0; r];
    let mut total = 0.0;
    for t in 0..trace.steps() {
        let wp = trace.waypoints[trace.active_waypoint[t]];
        if t == 0 || trace.active_waypoint[t] != trace.active_waypoint[t - 1] {
            let base = if t == 0 { &trace.initial } else { &trace.positions[t - 1] };
            for (s, p) in starting.iter_mut().zip(base) {
                *s = p.distance(wp).max(MIN_STARTING_DISTANCE);
            }
        }
        let step: f64 = trace.positions[t]
            .iter()
            .zip(&starting)
            .map(|(p, s)| (s - p.distance(wp)) / s)
            .sum();
        total += step / r as f64;
    }
    Ok(total / trace.steps() as f64 * safety_coefficient(trace))
}

/// Distance from each robot to its nearest neighbour.
pub fn nearest_neighbour_distances(points: &[Vec2]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, a)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| a.distance_sq(*b))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

/// Mean of `max(0, 1 - |nn - target| / target)` over robots and steps, times S.
pub fn dispersion_fitness(trace: &TrajectoryTrace) -> Result<f64, FitnessError> {
    trace.check()?;
    let r = trace.robots();
    if r < 2 {
        return Err(FitnessError::TooFewRobots {
            task: "dispersion",
            needed: 2,
            got: r,
        });
    }
    let target = trace.target_dist;
    let mut total = 0.0;
    for pos in &trace.positions {
        let step: f64 = nearest_neighbour_distances(pos)
            .into_iter()
            .map(|d| (1.0 - (d - target).abs() / target).max(0.0))
            .sum();
        total += step / r as f64;
    }
    Ok(total / trace.steps() as f64 * safety_coefficient(trace))
}

/// Connected components under "closer than `threshold`".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    /// Robot indices per cluster, each sorted, clusters ordered by first member.
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn count(&self) -> usize {
        self.clusters.len()
    }

    pub fn largest(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Robots closer than `threshold` (strictly) are linked; clusters are the
/// connected components.
pub fn cluster_partition(positions: &[Vec2], threshold: f64) -> ClusterPartition {
    let n = positions.len();
    let mut ds = DisjointSet::new(n);
    let t2 = threshold * threshold;
    for i in 0..n {
        for j in i + 1..n {
            if positions[i].distance_sq(positions[j]) < t2 {
                ds.union(i, j);
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = ds.find(i);
        by_root[root].push(i);
    }
    let mut clusters: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
    clusters.sort_by_key(|c| c[0]);
    ClusterPartition { clusters }
}

pub fn cluster_count(positions: &[Vec2]) -> usize {
    cluster_partition(positions, CLUSTER_THRESHOLD).count()
}

/// Time-weighted share of merged clusters, `sum t (R - c_t)/(R - 1) / sum t`, times S.
pub fn clustering_fitness(trace: &TrajectoryTrace) -> Result<f64, FitnessError> {
    trace.check()?;
    let r = trace.robots();
    if r < 2 {
        return Err(FitnessError::TooFewRobots {
            task: "clustering",
            needed: 2,
            got: r,
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, pos) in trace.positions.iter().enumerate() {
        let t = (k + 1) as f64;
        let c = cluster_count(pos) as f64;
        num += t * (r as f64 - c) / (r as f64 - 1.0);
        den += t;
    }
    Ok(num / den * safety_coefficient(trace))
}

/// Mean grid value after each step of the trace.
pub fn coverage_history(trace: &TrajectoryTrace, params: CoverageParams) -> Result<Vec<f64>, FitnessError> {
    let fence = trace.fence.as_ref().ok_or(FitnessError::MissingFence)?;
    let mut grid = CoverageGrid::new(fence, params).map_err(|_| FitnessError::MissingFence)?;
    Ok(trace
        .positions
        .iter()
        .map(|p| {
            grid.step(p);
            grid.mean_value()
        })
        .collect())
}

/// `(1/T) sum_t mean_c val(c_t)` times S.
pub fn monitoring_fitness_from_history(mean_values: &[f64], safety: f64) -> f64 {
    if mean_values.is_empty() {
        return 0.0;
    }
    mean_values.iter().sum::<f64>() / mean_values.len() as f64 * safety
}

pub fn monitoring_fitness(trace: &TrajectoryTrace) -> Result<f64, FitnessError> {
    trace.check()?;
    let history = coverage_history(trace, CoverageParams::default())?;
    Ok(monitoring_fitness_from_history(&history, safety_coefficient(trace)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_from(initial: Vec<Vec2>, steps: Vec<Vec<Vec2>>) -> TrajectoryTrace {
        let mut tr = TrajectoryTrace::new(initial);
        for s in steps {
            tr.push_step(s, 0);
        }
        tr
    }

    #[test]
    fn safety_examples() {
        assert_eq!(safety_from_distance(3.0), 1.0);
        assert_eq!(safety_from_distance(0.0), 0.1);
        assert!((safety_from_distance(1.5) - 0.55).abs() < 1e-15);
        assert_eq!(safety_from_distance(10.0), 1.0);
        assert_eq!(safety_from_distance(f64::INFINITY), 1.0);
    }

    #[test]
    fn homing_examples() {
        // stationary robots: zero progress
        let p = vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)];
        let mut tr = trace_from(p.clone(), vec![p.clone(), p.clone()]);
        tr.waypoints = vec![Vec2::new(0.0, 40.0)];
        assert_eq!(homing_fitness(&tr).unwrap(), 0.0);

        // two robots approaching 40 -> 20 -> 0 m, min pair distance kept at 4 m
        let mut tr = TrajectoryTrace::new(vec![Vec2::new(-2.0, 0.0), Vec2::new(2.0, 0.0)]);
        tr.waypoints = vec![Vec2::new(0.0, 0.0)];
        tr.initial = vec![Vec2::new(0.0, 40.0), Vec2::new(0.0, -40.0)];
        tr.positions = vec![
            vec![Vec2::new(0.0, 20.0), Vec2::new(0.0, -20.0)],
            vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)],
        ];
        tr.active_waypoint = vec![0, 0];
        tr.pair_min_dist = vec![40.0, 4.0];
        assert!((homing_fitness(&tr).unwrap() - 0.75).abs() < 1e-15);

        // moving away doubles the distance: term -1
        let mut tr = trace_from(vec![Vec2::new(0.0, 40.0)], vec![vec![Vec2::new(0.0, 80.0)]]);
        tr.waypoints = vec![Vec2::ZERO];
        assert_eq!(homing_fitness(&tr).unwrap(), -1.0);
    }

    #[test]
    fn homing_rebases_on_waypoint_switch() {
        let mut tr = TrajectoryTrace::new(vec![Vec2::new(0.0, 0.0)]);
        tr.waypoints = vec![Vec2::new(0.0, 10.0), Vec2::new(0.0, 30.0)];
        tr.push_step(vec![Vec2::new(0.0, 10.0)], 0); // term 1
        tr.push_step(vec![Vec2::new(0.0, 20.0)], 1); // start 20, now 10: 0.5
        assert!((homing_fitness(&tr).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dispersion_examples() {
        let at = |d: f64| vec![Vec2::new(0.0, 0.0), Vec2::new(d, 0.0), Vec2::new(0.0, d + 30.0)];
        let tr = trace_from(at(20.0), vec![at(20.0); 3]);
        // third robot is 50 m from the first, 53.85 from the second: its term is 0
        let third = (1.0 - ((50f64).min(20f64.hypot(50.0)) - 20.0).abs() / 20.0).max(0.0);
        assert!((dispersion_fitness(&tr).unwrap() - (2.0 + third) / 3.0).abs() < 1e-12);

        let pair = |d: f64| vec![Vec2::new(0.0, 0.0), Vec2::new(d, 0.0)];
        assert_eq!(dispersion_fitness(&trace_from(pair(20.0), vec![pair(20.0); 4])).unwrap(), 1.0);
        assert_eq!(dispersion_fitness(&trace_from(pair(10.0), vec![pair(10.0); 4])).unwrap(), 0.5);
        assert_eq!(dispersion_fitness(&trace_from(pair(0.0), vec![pair(0.0); 2])).unwrap(), 0.0);
        assert!(dispersion_fitness(&trace_from(vec![Vec2::ZERO], vec![vec![Vec2::ZERO]])).is_err());
    }

    #[test]
    fn cluster_examples() {
        let p = |xs: &[f64]| xs.iter().map(|&x| Vec2::new(x, 0.0)).collect::<Vec<_>>();
        assert_eq!(cluster_partition(&p(&[0.0, 5.0, 20.0]), 7.0).clusters, vec![vec![0, 1], vec![2]]);
        assert_eq!(cluster_partition(&p(&[0.0, 6.0, 12.0]), 7.0).count(), 1);
        assert_eq!(cluster_partition(&p(&[0.0]), 7.0).count(), 1);
        // exactly 7 m apart is not a link
        assert_eq!(cluster_partition(&p(&[0.0, 7.0]), 7.0).count(), 2);
    }

    #[test]
    fn clustering_examples() {
        let far = |n: usize| (0..n).map(|i| Vec2::new(i as f64 * 10.0, 0.0)).collect::<Vec<_>>();
        let tight = |n: usize| (0..n).map(|i| Vec2::new(i as f64 * 4.0, 0.0)).collect::<Vec<_>>();
        // always one cluster: raw 1, S = 1 (4 m apart)
        assert_eq!(clustering_fitness(&trace_from(tight(4), vec![tight(4); 5])).unwrap(), 1.0);
        assert_eq!(clustering_fitness(&trace_from(far(4), vec![far(4); 5])).unwrap(), 0.0);
        // R=4, c1=2, c2=1: (1*(2/3) + 2*1)/3
        let two = vec![Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(50.0, 0.0), Vec2::new(54.0, 0.0)];
        let tr = trace_from(two.clone(), vec![two, tight(4)]);
        assert!((clustering_fitness(&tr).unwrap() - (2.0 / 3.0 + 2.0) / 3.0).abs() < 1e-15);
        assert!(clustering_fitness(&trace_from(vec![Vec2::ZERO], vec![vec![Vec2::ZERO]])).is_err());
    }

    #[test]
    fn monitoring_examples() {
        let fence = GeoFence::rectangle(Vec2::ZERO, Vec2::new(10.0, 10.0)).unwrap();
        // nobody inside
        let out = vec![Vec2::new(100.0, 100.0)];
        let mut tr = trace_from(out.clone(), vec![out; 50]);
        tr.fence = Some(fence.clone());
        assert_eq!(monitoring_fitness(&tr).unwrap(), 0.0);

        // a robot at each quarter centre covers every cell of a 10 m square
        let quad = vec![
            Vec2::new(2.5, 2.5),
            Vec2::new(7.5, 2.5),
            Vec2::new(2.5, 7.5),
            Vec2::new(7.5, 7.5),
        ];
        let t = 40;
        let mut tr = trace_from(quad.clone(), vec![quad; t]);
        tr.fence = Some(fence);
        let expected = (t as f64 - 1.0) / t as f64;
        assert!((monitoring_fitness(&tr).unwrap() - expected).abs() < 1e-12);
        assert!(monitoring_fitness(&trace_from(vec![Vec2::ZERO], vec![vec![Vec2::ZERO]])).is_err());
    }
}
