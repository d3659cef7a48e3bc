//! Fixed replay scenarios with timed events, per-second metrics and
//! trajectory logs.
//!
//! Starting positions, noise and events depend only on the scenario and its
//! seed, so different controllers replayed with the same seed face the same
//! initial conditions.

use std::fmt::Write as _;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageGrid, CoverageParams};
use crate::error::{ConfigError, Error, MetricError, Result, SetupError};
use crate::evolution::{derive_seed, SeedNamespace, OUTPUT_COUNT};
use crate::fitness::{cluster_count, nearest_neighbour_distances, DISPERSION_TARGET};
use crate::geometry::{relative_bearing, GeoFence, Pose, Vec2};
use crate::neat::{Genome, Network};
use crate::sensors::{sense, SensorConfig, INPUT_COUNT};
use crate::sim::{place_robots, step_time, step_world, ActuationCommand, Placement, SimConfig, WorldState, STEPS_PER_SECOND};
use crate::task::TaskKind;

pub const METRIC_ROBOTS: &str = "robots";
pub const METRIC_WAYPOINT_DISTANCE: &str = "waypoint_distance";
pub const METRIC_DISPERSION_ERROR: &str = "dispersion_error";
pub const METRIC_CLUSTERS: &str = "clusters";
pub const METRIC_COVERAGE_FRACTION: &str = "coverage_fraction";
pub const METRIC_COVERAGE_MEAN: &str = "coverage_mean";

/// A timed change to the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// Make waypoint `index` the active one.
    Waypoint { at: f64, index: usize },
    /// Take the `count` most recently added robots out of the water.
    Remove { at: f64, count: usize },
    /// Put `count` robots in at `entry`. With `hold_until`, they first drive
    /// to the current swarm centre and hold there until that time before
    /// switching to the controller.
    Add {
        at: f64,
        count: usize,
        entry: Vec2,
        side: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hold_until: Option<f64>,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match *self {
            Event::Waypoint { at, .. } | Event::Remove { at, .. } | Event::Add { at, .. } => at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub task: TaskKind,
    pub robots: usize,
    pub placement: Placement,
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub waypoints: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fence: Option<GeoFence>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default = "default_target")]
    pub target_dist: f64,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub coverage: CoverageParams,
}

fn default_target() -> f64 {
    DISPERSION_TARGET
}

/// Identifiers of the built-in scenarios.
pub const BUILTIN: [&str; 8] = [
    "homing",
    "dispersion",
    "clustering",
    "monitoring-square",
    "monitoring-l",
    "monitoring-rectangle",
    "dispersion-robustness",
    "monitoring-robustness",
];

fn square(center: Vec2, side: f64, min_separation: f64) -> Placement {
    Placement::Square {
        center,
        side,
        min_separation,
    }
}

/// 100×100 m square minus a 50×50 m corner, scaled to 10 000 m².
pub fn l_shape() -> GeoFence {
    let k = (10_000.0f64 / 7_500.0).sqrt();
    let pts = [(-50.0, -50.0), (50.0, -50.0), (50.0, 0.0), (0.0, 0.0), (0.0, 50.0), (-50.0, 50.0)];
    GeoFence::new(pts.iter().map(|&(x, y)| Vec2::new(x * k, y * k)).collect()).expect("valid L shape")
}

fn centred_rectangle(w: f64, h: f64) -> GeoFence {
    GeoFence::rectangle(Vec2::new(-w / 2.0, -h / 2.0), Vec2::new(w / 2.0, h / 2.0)).expect("valid rectangle")
}

impl Scenario {
    fn base(id: &str, task: TaskKind, robots: usize, placement: Placement, duration: f64) -> Self {
        Scenario {
            id: id.to_string(),
            task,
            robots,
            placement,
            duration,
            waypoints: Vec::new(),
            fence: None,
            events: Vec::new(),
            target_dist: DISPERSION_TARGET,
            sim: SimConfig::default(),
            sensors: SensorConfig::default(),
            coverage: CoverageParams::default(),
        }
    }

    fn monitoring(id: &str, fence: GeoFence, start: Vec2, duration: f64) -> Self {
        Scenario {
            fence: Some(fence),
            ..Scenario::base(id, TaskKind::Monitoring, 8, square(start, 20.0, 3.0), duration)
        }
    }

    pub fn builtin(id: &str) -> Option<Self> {
        let sc = match id {
            "homing" => Scenario {
                waypoints: vec![Vec2::new(0.0, 40.0), Vec2::new(40.0, 40.0), Vec2::new(40.0, 80.0)],
                events: [(0.0, 0), (60.0, 1), (120.0, 2), (180.0, 1)]
                    .iter()
                    .map(|&(at, index)| Event::Waypoint { at, index })
                    .collect(),
                ..Scenario::base(id, TaskKind::Homing, 8, square(Vec2::ZERO, 20.0, 3.0), 240.0)
            },
            "dispersion" => Scenario::base(id, TaskKind::Dispersion, 8, square(Vec2::ZERO, 28.0, 5.0), 90.0),
            "clustering" => Scenario::base(
                id,
                TaskKind::Clustering,
                8,
                Placement::ChainedSquare {
                    center: Vec2::ZERO,
                    side: 100.0,
                    min_separation: 3.0,
                    max_nearest: 40.0,
                },
                180.0,
            ),
            "monitoring-square" => Scenario::monitoring(id, centred_rectangle(100.0, 100.0), Vec2::ZERO, 300.0),
            "monitoring-l" => {
                let k = (10_000.0f64 / 7_500.0).sqrt();
                Scenario::monitoring(id, l_shape(), Vec2::new(-25.0 * k, -25.0 * k), 300.0)
            }
            "monitoring-rectangle" => {
                Scenario::monitoring(id, centred_rectangle(200.0, 50.0), Vec2::ZERO, 300.0)
            }
            "dispersion-robustness" => Scenario {
                events: vec![Event::Add {
                    at: 60.0,
                    count: 4,
                    entry: Vec2::new(0.0, -80.0),
                    side: 15.0,
                    hold_until: Some(180.0),
                }],
                ..Scenario::base(id, TaskKind::Dispersion, 4, square(Vec2::ZERO, 28.0, 5.0), 300.0)
            },
            "monitoring-robustness" => Scenario {
                events: vec![
                    Event::Remove { at: 300.0, count: 4 },
                    Event::Add {
                        at: 600.0,
                        count: 2,
                        entry: Vec2::new(-40.0, 0.0),
                        side: 10.0,
                        hold_until: None,
                    },
                ],
                ..Scenario::monitoring(id, centred_rectangle(100.0, 100.0), Vec2::ZERO, 900.0)
            },
            _ => return None,
        };
        Some(sc)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// A built-in id, or else a path to a scenario file.
    pub fn resolve(name: &str) -> Result<Self> {
        if let Some(sc) = Scenario::builtin(name) {
            return Ok(sc);
        }
        let path = Path::new(name);
        if !path.exists() {
            return Err(ConfigError::Invalid(format!(
                "unknown scenario '{name}': not a built-in ({}) or an existing file",
                BUILTIN.join(", ")
            ))
            .into());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_toml(&text)
    }

    pub fn with_robots(mut self, n: usize) -> Self {
        self.robots = n;
        self
    }

    pub fn steps(&self) -> u64 {
        (self.duration * STEPS_PER_SECOND as f64).round() as u64
    }

    pub fn validate(&self) -> Result<(), SetupError> {
        if !(self.duration > 0.0) {
            return Err(SetupError("scenario duration must be positive".into()));
        }
        let mut prev = 0.0;
        for e in &self.events {
            let t = e.time();
            if t < prev || t > self.duration {
                return Err(SetupError(format!(
                    "events must be time-ordered within the {} s run (event at {t} s)",
                    self.duration
                )));
            }
            if let Event::Waypoint { index, .. } = *e {
                if index >= self.waypoints.len() {
                    return Err(SetupError(format!("waypoint {index} does not exist")));
                }
            }
            prev = t;
        }
        Ok(())
    }

    fn metric_names(&self) -> Vec<&'static str> {
        let mut m = vec![METRIC_ROBOTS];
        if !self.waypoints.is_empty() {
            m.push(METRIC_WAYPOINT_DISTANCE);
        }
        m.push(METRIC_DISPERSION_ERROR);
        m.push(METRIC_CLUSTERS);
        if self.fence.is_some() {
            m.push(METRIC_COVERAGE_FRACTION);
            m.push(METRIC_COVERAGE_MEAN);
        }
        m
    }
}

/// Named time series sampled once per second.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `rows[k][j]` is metric `j` at `times[k]`.
    pub rows: Vec<Vec<f64>>,
}

impl MetricSeries {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        MetricSeries {
            names: names.into_iter().map(Into::into).collect(),
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        assert_eq!(row.len(), self.names.len());
        assert!(self.times.last().map_or(true, |&p| t > p), "timestamps must increase");
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, MetricError> {
        let j = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| MetricError::MissingColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn last(&self, name: &str) -> Result<f64, MetricError> {
        self.column(name)?
            .last()
            .copied()
            .ok_or_else(|| MetricError::MissingColumn(name.to_string()))
    }

    /// Mean of a column over `from < t ≤ to`, skipping NaN.
    pub fn mean_between(&self, name: &str, from: f64, to: f64) -> Result<f64, MetricError> {
        let col = self.column(name)?;
        let v: Vec<f64> = self
            .times
            .iter()
            .zip(col)
            .filter(|&(&t, x)| t > from && t <= to && !x.is_nan())
            .map(|(_, x)| x)
            .collect();
        Ok(crate::evolution::mean(&v))
    }

    /// CSV with a `t` column followed by one column per metric.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.rows) {
            let _ = write!(s, "{t}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or("empty metric file")?.split(',').collect();
        if header.first() != Some(&"t") {
            return Err("first column must be `t`".into());
        }
        let mut series = MetricSeries::new(header[1..].iter().map(|s| s.to_string()));
        for (i, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
                .collect::<Result<_, _>>()?;
            if v.len() != header.len() {
                return Err(format!("row {} has {} fields, expected {}", i + 1, v.len(), header.len()));
            }
            if series.times.last().map_or(false, |&p| v[0] <= p) {
                return Err(format!("row {}: timestamps must increase", i + 1));
            }
            series.times.push(v[0]);
            series.rows.push(v[1..].to_vec());
        }
        Ok(series)
    }
}

/// Mean absolute deviation of nearest-neighbour distance from the target
/// over the final `window` seconds.
pub fn dispersion_error(series: &MetricSeries, window: f64) -> Result<f64, MetricError> {
    let end = series.times.last().copied().unwrap_or(0.0);
    let start = series.times.first().copied().unwrap_or(0.0);
    if window > end - start {
        return Err(MetricError::WindowTooLong {
            window,
            available: end - start,
        });
    }
    series.mean_between(METRIC_DISPERSION_ERROR, end - window, end)
}

/// Mean |nearest-neighbour distance − target| over robots.
pub fn nearest_neighbour_error(positions: &[Vec2], target: f64) -> f64 {
    if positions.len() < 2 {
        return f64::NAN;
    }
    let nn = nearest_neighbour_distances(positions);
    nn.iter().map(|d| (d - target).abs()).sum::<f64>() / nn.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub id: u32,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

/// Append the current state of every robot.
pub fn log_states(world: &WorldState, out: &mut Vec<TrajectoryRow>) {
    let t = world.clock();
    out.extend(world.robots().iter().map(|r| TrajectoryRow {
        t,
        id: r.id,
        position: r.pose.position,
        heading: r.pose.heading,
        speed: r.speed,
    }));
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::from("t,id,x,y,heading,speed\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.t, r.id, r.position.x, r.position.y, r.heading, r.speed
        );
    }
    s
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty trajectory file")?;
    let cols: Vec<&str> = header.split(',').collect();
    let need = ["t", "id", "x", "y", "heading", "speed"];
    let idx: Vec<usize> = need
        .iter()
        .map(|n| cols.iter().position(|c| c == n).ok_or(format!("missing column `{n}`")))
        .collect::<Result<_, _>>()?;
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |k: usize| {
                f.get(idx[k])
                    .ok_or(format!("row {}: too few fields", i + 1))?
                    .parse::<f64>()
                    .map_err(|e| format!("row {}: {e}", i + 1))
            };
            Ok(TrajectoryRow {
                t: num(0)?,
                id: num(1)? as u32,
                position: Vec2::new(num(2)?, num(3)?),
                heading: num(4)?,
                speed: num(5)?,
            })
        })
        .collect()
}

/// What drives one robot.
#[derive(Debug, Clone)]
pub enum Controller {
    Network(Network),
    /// Drive to `target` and hold there.
    GoTo { target: Vec2 },
}

/// Proportional go-to: turn toward the target, slow down on arrival.
pub fn go_to_command(pose: &Pose, target: Vec2, sim: &SimConfig) -> ActuationCommand {
    let rel = relative_bearing(pose, target);
    let d = pose.position.distance(target);
    let lim = sim.limits;
    let turn = (rel * 2.0).clamp(-lim.max_turn_rate, lim.max_turn_rate);
    let facing = rel.to_radians().cos().max(0.0);
    let speed = if d < 2.0 { 0.0 } else { lim.max_speed * (d / 10.0).min(1.0) * facing };
    ActuationCommand::new(speed, turn)
}

/// A world plus one controller per robot, kept index-aligned.
#[derive(Debug, Clone)]
pub struct Swarm {
    pub world: WorldState,
    pub controllers: Vec<Controller>,
    pub sensors: SensorConfig,
    cmds: Vec<ActuationCommand>,
}

impl Swarm {
    pub fn new(world: WorldState, sensors: SensorConfig) -> Self {
        Swarm {
            world,
            controllers: Vec::new(),
            sensors,
            cmds: Vec::new(),
        }
    }

    pub fn add(&mut self, pose: Pose, controller: Controller) -> u32 {
        self.controllers.push(controller);
        self.world.add_robot(pose)
    }

    pub fn remove(&mut self, id: u32) {
        if let Some(i) = self.world.robots().iter().position(|r| r.id == id) {
            self.world.remove_robot(id);
            self.controllers.remove(i);
        }
    }

    pub fn step(&mut self) {
        self.cmds.clear();
        let limits = self.world.config.limits;
        let mut y = [0.0; OUTPUT_COUNT];
        for (i, c) in self.controllers.iter_mut().enumerate() {
            let cmd = match c {
                Controller::Network(net) => {
                    let frame = sense(&self.world, i, &self.sensors);
                    net.activate_into(frame.as_slice(), &mut y);
                    ActuationCommand::from_outputs(y, &limits)
                }
                Controller::GoTo { target } => {
                    go_to_command(&self.world.robots()[i].sensed, *target, &self.world.config)
                }
            };
            self.cmds.push(cmd);
        }
        step_world(&mut self.world, &self.cmds);
    }
}

pub fn check_arity(genome: &Genome) -> Result<()> {
    if genome.input_count() != INPUT_COUNT || genome.output_count() != OUTPUT_COUNT {
        return Err(Error::Arity {
            inputs: genome.input_count(),
            outputs: genome.output_count(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub series: MetricSeries,
    pub trajectory: Vec<TrajectoryRow>,
    pub initial_positions: Vec<Vec2>,
    /// Final coverage grid, for scenarios with a fence.
    pub coverage: Option<CoverageGrid>,
}

fn place_with_heading(world: &mut WorldState, n: usize, placement: &Placement) -> Result<Vec<Pose>, SetupError> {
    let pts = place_robots(n, placement, world.rng_mut())?;
    Ok(pts
        .into_iter()
        .map(|p| {
            let h = world.rng_mut().gen_range(0.0..360.0);
            Pose::new(p, h)
        })
        .collect())
}

/// Replay a genome on a scenario.
pub fn run_scenario(sc: &Scenario, genome: &Genome, seed: u64) -> Result<ScenarioRun> {
    check_arity(genome)?;
    sc.validate()?;
    let template = Network::from_genome(genome, crate::neat::NeatParams::default().sigmoid_slope);

    let mut world = WorldState::new(sc.sim, derive_seed(seed, SeedNamespace::Scenario, 0, 0, 0));
    world.draw_current();
    world.waypoints = sc.waypoints.clone();
    world.fence = sc.fence.clone();
    let mut swarm = Swarm::new(world, sc.sensors);
    for pose in place_with_heading(&mut swarm.world, sc.robots, &sc.placement)? {
        swarm.add(pose, Controller::Network(template.clone()));
    }
    let initial_positions = swarm.world.positions();

    let mut grid = match &sc.fence {
        Some(f) => Some(CoverageGrid::new(f, sc.coverage)?),
        None => None,
    };
    let names = sc.metric_names();
    let mut series = MetricSeries::new(names.iter().copied());
    let mut trajectory = Vec::new();
    let mut pending = sc.events.iter().peekable();
    // robots waiting to be released: (id, release time)
    let mut held: Vec<(u32, f64)> = Vec::new();

    let record = |swarm: &Swarm, grid: &Option<CoverageGrid>, series: &mut MetricSeries| {
        let w = &swarm.world;
        let t = w.clock();
        let pos = w.positions();
        let row = names
            .iter()
            .map(|&n| match n {
                METRIC_ROBOTS => pos.len() as f64,
                METRIC_WAYPOINT_DISTANCE => match w.active_waypoint() {
                    Some(wp) if !pos.is_empty() => pos.iter().map(|p| p.distance(wp)).sum::<f64>() / pos.len() as f64,
                    _ => f64::NAN,
                },
                METRIC_DISPERSION_ERROR => nearest_neighbour_error(&pos, sc.target_dist),
                METRIC_CLUSTERS => cluster_count(&pos) as f64,
                METRIC_COVERAGE_FRACTION => grid.as_ref().map_or(f64::NAN, |g| g.covered_fraction()),
                METRIC_COVERAGE_MEAN => grid.as_ref().map_or(f64::NAN, |g| g.mean_value()),
                _ => unreachable!(),
            })
            .collect();
        series.push(t, row);
    };

    let steps = sc.steps();
    for step in 0..=steps {
        let now = step_time(step);
        while let Some(e) = pending.next_if(|e| e.time() <= now + 1e-9) {
            match *e {
                Event::Waypoint { index, .. } => swarm.world.active_waypoint = index,
                Event::Remove { count, .. } => {
                    let mut ids: Vec<u32> = swarm.world.robots().iter().map(|r| r.id).collect();
                    ids.sort_unstable();
                    for id in ids.into_iter().rev().take(count) {
                        swarm.remove(id);
                        held.retain(|&(h, _)| h != id);
                    }
                }
                Event::Add {
                    count,
                    entry,
                    side,
                    hold_until,
                    ..
                } => {
                    let pos = swarm.world.positions();
                    let centre = if pos.is_empty() {
                        entry
                    } else {
                        pos.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / pos.len() as f64)
                    };
                    let placement = square(entry, side, 3.0);
                    for pose in place_with_heading(&mut swarm.world, count, &placement)? {
                        let c = match hold_until {
                            Some(_) => Controller::GoTo { target: centre },
                            None => Controller::Network(template.clone()),
                        };
                        let id = swarm.add(pose, c);
                        if let Some(t) = hold_until {
                            held.push((id, t));
                        }
                    }
                }
            }
        }
        if !held.is_empty() {
            let robots = swarm.world.robots();
            for (i, r) in robots.iter().enumerate() {
                if held.iter().any(|&(id, t)| id == r.id && t <= now + 1e-9) {
                    swarm.controllers[i] = Controller::Network(template.clone());
                }
            }
            held.retain(|&(_, t)| t > now + 1e-9);
        }
        log_states(&swarm.world, &mut trajectory);
        if step % STEPS_PER_SECOND == 0 {
            record(&swarm, &grid, &mut series);
        }
        if step == steps {
            break;
        }
        swarm.step();
        if let Some(g) = grid.as_mut() {
            g.step(&swarm.world.positions());
        }
    }

    Ok(ScenarioRun {
        series,
        trajectory,
        initial_positions,
        coverage: grid,
    })
}
