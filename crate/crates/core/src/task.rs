//! Task definitions and single-trial execution.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FitnessError, SetupError};
use crate::fitness::{
    clustering_fitness, dispersion_fitness, homing_fitness, monitoring_fitness, TrajectoryTrace,
    DISPERSION_TARGET,
};
use crate::geometry::{GeoFence, Pose, Vec2};
use crate::neat::{Genome, Network};
use crate::sensors::{sense, SensorConfig};
use crate::sim::{place_robots, step_world, ActuationCommand, Placement, SimConfig, WorldState, STEPS_PER_SECOND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Homing,
    Dispersion,
    Clustering,
    Monitoring,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Homing,
        TaskKind::Dispersion,
        TaskKind::Clustering,
        TaskKind::Monitoring,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Homing => "homing",
            TaskKind::Dispersion => "dispersion",
            TaskKind::Clustering => "clustering",
            TaskKind::Monitoring => "monitoring",
        }
    }

    /// Default generation budget.
    pub fn default_generations(self) -> usize {
        match self {
            TaskKind::Clustering => 400,
            _ => 100,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?} (expected homing, dispersion, clustering or monitoring)"))
    }
}

/// How monitoring areas are generated per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FenceSpec {
    /// Random star-shaped polygons or rotated rectangles around the start area.
    Random {
        min_radius: f64,
        max_radius: f64,
    },
    Fixed {
        fence: GeoFence,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: TaskKind,
    pub robots_min: usize,
    pub robots_max: usize,
    /// Trial length in seconds.
    pub duration: f64,
    pub placement: Placement,
    /// Homing: waypoint distance range from the start area centre (m).
    pub waypoint_distance: [f64; 2],
    pub fence: Option<FenceSpec>,
    pub target_dist: f64,
    pub sim: SimConfig,
    pub sensors: SensorConfig,
}

impl TaskConfig {
    /// Trial setup used during evolution for each task.
    pub fn default_for(task: TaskKind) -> Self {
        let square = |side: f64, sep: f64| Placement::Square {
            center: Vec2::ZERO,
            side,
            min_separation: sep,
        };
        let (placement, duration) = match task {
            TaskKind::Homing => (square(20.0, 3.0), 60.0),
            TaskKind::Dispersion => (square(28.0, 5.0), 90.0),
            TaskKind::Clustering => (
                Placement::ChainedSquare {
                    center: Vec2::ZERO,
                    side: 100.0,
                    min_separation: 3.0,
                    max_nearest: 40.0,
                },
                180.0,
            ),
            TaskKind::Monitoring => (square(20.0, 3.0), 300.0),
        };
        TaskConfig {
            task,
            robots_min: 5,
            robots_max: 10,
            duration,
            placement,
            waypoint_distance: [30.0, 60.0],
            fence: (task == TaskKind::Monitoring).then_some(FenceSpec::Random {
                min_radius: 40.0,
                max_radius: 70.0,
            }),
            target_dist: DISPERSION_TARGET,
            sim: SimConfig::default(),
            sensors: SensorConfig::default(),
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration * STEPS_PER_SECOND as f64).round() as usize
    }

    pub fn with_robots(mut self, n: usize) -> Self {
        self.robots_min = n;
        self.robots_max = n;
        self
    }
}

/// Random simple polygon containing the disk of radius `min_radius / 2`
/// around `centre`: either a star-shaped polygon with 5-9 vertices and
/// bounded angular gaps, or a rotated rectangle.
pub fn random_fence<R: Rng>(centre: Vec2, min_radius: f64, max_radius: f64, rng: &mut R) -> GeoFence {
    loop {
        let vertices: Vec<Vec2> = if rng.gen_bool(0.5) {
            let n = rng.gen_range(5..=9);
            let spacing = 360.0 / n as f64;
            let offset = rng.gen_range(0.0..360.0);
            (0..n)
                .map(|k| {
                    let a = offset + spacing * (k as f64 + rng.gen_range(-0.3..0.3));
                    let r = rng.gen_range(min_radius..=max_radius);
                    centre + Vec2::from_heading(a) * r
                })
                .collect()
        } else {
            let w = rng.gen_range(min_radius..=2.0 * max_radius);
            let h = rng.gen_range(min_radius..=2.0 * max_radius);
            let rot = rng.gen_range(0.0..180.0);
            [(-w, -h), (w, -h), (w, h), (-w, h)]
                .iter()
                .map(|&(x, y)| centre + Vec2::new(x / 2.0, y / 2.0).rotate_cw(rot))
                .collect()
        };
        if let Ok(f) = GeoFence::new(vertices) {
            return f;
        }
    }
}

/// Build the initial world of one randomized trial.
pub fn sample_trial(cfg: &TaskConfig, seed: u64) -> Result<WorldState, SetupError> {
    let mut world = WorldState::new(cfg.sim, seed);
    let lo = cfg.robots_min.min(cfg.robots_max);
    let hi = cfg.robots_max.max(cfg.robots_min);
    let n = world.rng_mut().gen_range(lo..=hi);
    world.draw_current();

    let centre = cfg.placement.center();
    match cfg.task {
        TaskKind::Homing => {
            let [dmin, dmax] = cfg.waypoint_distance;
            let rng = world.rng_mut();
            let bearing = rng.gen_range(0.0..360.0);
            let dist = rng.gen_range(dmin..=dmax.max(dmin));
            world.waypoints = vec![centre + Vec2::from_heading(bearing) * dist];
        }
        TaskKind::Monitoring => {
            world.fence = match &cfg.fence {
                Some(FenceSpec::Fixed { fence }) => Some(fence.clone()),
                Some(FenceSpec::Random {
                    min_radius,
                    max_radius,
                }) => Some(random_fence(centre, *min_radius, *max_radius, world.rng_mut())),
                None => None,
            };
        }
        TaskKind::Dispersion | TaskKind::Clustering => {}
    }

    let positions = place_robots(n, &cfg.placement, world.rng_mut())?;
    for p in positions {
        let heading = world.rng_mut().gen_range(0.0..360.0);
        world.add_robot(Pose::new(p, heading));
    }
    Ok(world)
}

/// Score a finished trace with the task's fitness function.
pub fn score(task: TaskKind, trace: &TrajectoryTrace) -> Result<f64, FitnessError> {
    match task {
        TaskKind::Homing => homing_fitness(trace),
        TaskKind::Dispersion => dispersion_fitness(trace),
        TaskKind::Clustering => clustering_fitness(trace),
        TaskKind::Monitoring => monitoring_fitness(trace),
    }
}

/// Compute one command per robot for the current world.
pub fn swarm_commands(
    world: &WorldState,
    nets: &mut [Network],
    sensors: &SensorConfig,
    out: &mut Vec<ActuationCommand>,
) {
    out.clear();
    let limits = world.config.limits;
    let mut y = [0.0; 2];
    for (i, net) in nets.iter_mut().enumerate() {
        let frame = sense(world, i, sensors);
        net.activate_into(frame.as_slice(), &mut y);
        out.push(ActuationCommand::from_outputs(y, &limits));
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub fitness: f64,
    pub trace: TrajectoryTrace,
}

/// Run one homogeneous-swarm trial: every robot runs its own copy of the
/// genome's network.
pub fn run_trial(genome: &Genome, slope: f64, cfg: &TaskConfig, seed: u64) -> Result<TrialOutcome, SetupError> {
    let mut world = sample_trial(cfg, seed)?;
    let template = Network::from_genome(genome, slope);
    let mut nets = vec![template; world.len()];
    let mut trace = TrajectoryTrace::new(world.positions());
    trace.waypoints = world.waypoints.clone();
    trace.fence = world.fence.clone();
    trace.target_dist = cfg.target_dist;
    let mut cmds = Vec::with_capacity(world.len());
    for _ in 0..cfg.steps() {
        swarm_commands(&world, &mut nets, &cfg.sensors, &mut cmds);
        step_world(&mut world, &cmds);
        trace.push_step(world.positions(), world.active_waypoint);
    }
    let fitness = score(cfg.task, &trace).map_err(|e| SetupError(e.to_string()))?;
    Ok(TrialOutcome { fitness, trace })
}
