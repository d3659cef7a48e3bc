//! Discrete-time swarm stepper.
//!
//! Each robot is a unicycle with first-order lag toward the commanded linear
//! speed and turn rate. Noise enters in three layers: per-trial parameter
//! variation (effective top speed), per-step sensing noise (GPS fix and
//! compass), and per-step actuator noise. A uniform water current drifts every
//! robot. Neighbours only ever see each other through the broadcast ledger,
//! refreshed once per simulated second.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::SetupError;
use crate::geometry::{normalize_heading, GeoFence, Pose, Vec2};

/// Control and integration period (seconds).
pub const DT: f64 = 0.1;
/// Steps per simulated second.
pub const STEPS_PER_SECOND: u64 = 10;
/// Simulated time of a step index; exact at whole seconds.
pub fn step_time(step: u64) -> f64 {
    step as f64 / STEPS_PER_SECOND as f64
}

/// Steps between two position broadcasts of the same robot.
pub const BROADCAST_PERIOD_STEPS: u64 = STEPS_PER_SECOND;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotLimits {
    /// m/s
    pub max_speed: f64,
    /// deg/s
    pub max_turn_rate: f64,
    /// Distance between the two thrusters (m); used by the motor-speed view only.
    pub baseline: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        RobotLimits {
            max_speed: 1.7,
            max_turn_rate: 90.0,
            baseline: 0.3,
        }
    }
}

/// First-order lag time constants (seconds). Zero means the command is
/// reached within one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dynamics {
    pub tau_speed: f64,
    pub tau_turn: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Dynamics {
            tau_speed: 1.0,
            tau_turn: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Per-trial relative spread of each robot's top speed (uniform ±).
    pub param_variation: f64,
    /// Per-step GPS position noise, standard deviation in meters.
    pub gps_sigma: f64,
    /// Per-step compass noise, standard deviation in degrees.
    pub heading_sigma: f64,
    /// Per-step relative actuator noise (uniform ±).
    pub actuator_noise: f64,
    /// Water current speed (m/s); direction is drawn per trial.
    pub current_speed: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            param_variation: 0.1,
            gps_sigma: 1.5,
            heading_sigma: 5.0,
            actuator_noise: 0.05,
            current_speed: 0.1,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig {
            param_variation: 0.0,
            gps_sigma: 0.0,
            heading_sigma: 0.0,
            actuator_noise: 0.0,
            current_speed: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub limits: RobotLimits,
    pub dynamics: Dynamics,
    pub noise: NoiseConfig,
}

impl SimConfig {
    /// Noise-free configuration with instantaneous dynamics.
    pub fn ideal() -> Self {
        SimConfig {
            limits: RobotLimits::default(),
            dynamics: Dynamics {
                tau_speed: 0.0,
                tau_turn: 0.0,
            },
            noise: NoiseConfig::none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuationCommand {
    /// m/s
    pub speed: f64,
    /// deg/s, clockwise positive
    pub turn_rate: f64,
}

impl ActuationCommand {
    pub const STOP: ActuationCommand = ActuationCommand {
        speed: 0.0,
        turn_rate: 0.0,
    };

    pub fn new(speed: f64, turn_rate: f64) -> Self {
        ActuationCommand { speed, turn_rate }
    }

    /// Map two controller outputs in [0, 1] onto a command: the first sets
    /// the forward speed, the second the turn rate around 0.5.
    pub fn from_outputs(outputs: [f64; 2], limits: &RobotLimits) -> Self {
        ActuationCommand {
            speed: outputs[0] * limits.max_speed,
            turn_rate: (2.0 * outputs[1] - 1.0) * limits.max_turn_rate,
        }
    }
}

/// Convert a (speed, turn rate) command into left/right thruster speeds.
///
/// The command is first clamped to the robot limits. If a wheel would then
/// exceed the top speed, both wheels are shifted down together so that the
/// turn rate is kept and the forward speed gives way.
pub fn convert_to_motor_speeds(cmd: ActuationCommand, limits: &RobotLimits) -> (f64, f64) {
    let v = cmd.speed.clamp(0.0, limits.max_speed);
    let w = cmd
        .turn_rate
        .clamp(-limits.max_turn_rate, limits.max_turn_rate)
        .to_radians();
    let half = w * limits.baseline / 2.0;
    let (mut left, mut right) = (v + half, v - half);
    let excess = left.max(right) - limits.max_speed;
    if excess > 0.0 {
        left -= excess;
        right -= excess;
    }
    (left, right)
}

/// Inverse of [`convert_to_motor_speeds`]: (speed m/s, turn rate deg/s).
pub fn motor_speeds_to_command(left: f64, right: f64, limits: &RobotLimits) -> ActuationCommand {
    ActuationCommand {
        speed: (left + right) / 2.0,
        turn_rate: ((left - right) / limits.baseline).to_degrees(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: u32,
    /// True pose.
    pub pose: Pose,
    /// m/s, in [0, effective max speed]
    pub speed: f64,
    /// deg/s
    pub turn_rate: f64,
    /// Per-trial multiplier on the nominal top speed.
    pub speed_scale: f64,
    /// Latest GPS/compass reading; what the robot believes its pose is.
    pub sensed: Pose,
}

impl RobotState {
    pub fn new(id: u32, pose: Pose) -> Self {
        RobotState {
            id,
            pose,
            speed: 0.0,
            turn_rate: 0.0,
            speed_scale: 1.0,
            sensed: pose,
        }
    }

    pub fn max_speed(&self, limits: &RobotLimits) -> f64 {
        limits.max_speed * self.speed_scale
    }
}

/// Multiplicative actuator perturbation for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorNoise {
    pub speed_factor: f64,
    pub turn_factor: f64,
}

impl ActuatorNoise {
    pub const NONE: ActuatorNoise = ActuatorNoise {
        speed_factor: 1.0,
        turn_factor: 1.0,
    };
}

fn lag_gain(tau: f64) -> f64 {
    if tau <= 0.0 {
        1.0
    } else {
        1.0 - (-DT / tau).exp()
    }
}

/// Advance one robot by one control period.
pub fn step_robot(
    state: &RobotState,
    cmd: ActuationCommand,
    cfg: &SimConfig,
    current: Vec2,
    actuator: ActuatorNoise,
) -> RobotState {
    let vmax = state.max_speed(&cfg.limits);
    let wmax = cfg.limits.max_turn_rate;
    let target_v = (cmd.speed * actuator.speed_factor).clamp(0.0, vmax);
    let target_w = (cmd.turn_rate * actuator.turn_factor).clamp(-wmax, wmax);

    let speed = (state.speed + lag_gain(cfg.dynamics.tau_speed) * (target_v - state.speed))
        .clamp(0.0, vmax);
    let turn_rate = (state.turn_rate
        + lag_gain(cfg.dynamics.tau_turn) * (target_w - state.turn_rate))
        .clamp(-wmax, wmax);

    // midpoint heading keeps the integration second order in DT
    let mid_heading = state.pose.heading + 0.5 * turn_rate * DT;
    let position =
        state.pose.position + Vec2::from_heading(mid_heading) * (speed * DT) + current * DT;
    let heading = normalize_heading(state.pose.heading + turn_rate * DT);

    RobotState {
        pose: Pose { position, heading },
        speed,
        turn_rate,
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub id: u32,
    /// Position as announced (the robot's own GPS reading at broadcast time).
    pub position: Vec2,
    /// Step at which the broadcast was made.
    pub step: u64,
}

impl LedgerEntry {
    pub fn time(&self) -> f64 {
        step_time(self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    step: u64,
    robots: Vec<RobotState>,
    /// Index-aligned with `robots`.
    ledger: Vec<LedgerEntry>,
    pub waypoints: Vec<Vec2>,
    pub active_waypoint: usize,
    pub fence: Option<GeoFence>,
    /// Drift velocity (m/s).
    pub current: Vec2,
    pub config: SimConfig,
    next_id: u32,
    rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(config: SimConfig, seed: u64) -> Self {
        WorldState {
            step: 0,
            robots: Vec::new(),
            ledger: Vec::new(),
            waypoints: Vec::new(),
            active_waypoint: 0,
            fence: None,
            current: Vec2::ZERO,
            config,
            next_id: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn clock(&self) -> f64 {
        step_time(self.step)
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.robots.iter().map(|r| r.pose.position).collect()
    }

    pub fn active_waypoint(&self) -> Option<Vec2> {
        self.waypoints.get(self.active_waypoint).copied()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Draw a random current direction with the configured speed.
    pub fn draw_current(&mut self) {
        let dir = self.rng.gen_range(0.0..360.0);
        self.current = Vec2::from_heading(dir) * self.config.noise.current_speed;
    }

    /// Add a robot at `pose`; it broadcasts immediately. Returns its id.
    pub fn add_robot(&mut self, pose: Pose) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        let mut robot = RobotState::new(id, pose);
        let var = self.config.noise.param_variation;
        if var > 0.0 {
            robot.speed_scale = 1.0 + self.rng.gen_range(-var..=var);
        }
        robot.sensed = self.sense(&robot.pose);
        self.ledger.push(LedgerEntry {
            id,
            position: robot.sensed.position,
            step: self.step,
        });
        self.robots.push(robot);
        id
    }

    /// Take a robot out of the water. Its ledger entry expires with it.
    pub fn remove_robot(&mut self, id: u32) -> Option<RobotState> {
        let idx = self.robots.iter().position(|r| r.id == id)?;
        self.ledger.remove(idx);
        Some(self.robots.remove(idx))
    }

    fn sense(&mut self, pose: &Pose) -> Pose {
        let n = &self.config.noise;
        let (gps, compass) = (n.gps_sigma, n.heading_sigma);
        let mut position = pose.position;
        if gps > 0.0 {
            let d = Normal::new(0.0, gps).expect("finite sigma");
            position.x += d.sample(&mut self.rng);
            position.y += d.sample(&mut self.rng);
        }
        let mut heading = pose.heading;
        if compass > 0.0 {
            heading += Normal::new(0.0, compass)
                .expect("finite sigma")
                .sample(&mut self.rng);
        }
        Pose::new(position, heading)
    }

    fn actuator_noise(&mut self) -> ActuatorNoise {
        let a = self.config.noise.actuator_noise;
        if a > 0.0 {
            ActuatorNoise {
                speed_factor: 1.0 + self.rng.gen_range(-a..=a),
                turn_factor: 1.0 + self.rng.gen_range(-a..=a),
            }
        } else {
            ActuatorNoise::NONE
        }
    }
}

/// Step every robot once with its command, refresh stale broadcasts and
/// advance the clock by [`DT`].
///
/// Panics if the number of commands differs from the number of robots.
pub fn step_world(world: &mut WorldState, commands: &[ActuationCommand]) {
    assert_eq!(
        commands.len(),
        world.robots.len(),
        "one command per robot is required"
    );
    let cfg = world.config;
    let current = world.current;
    for i in 0..world.robots.len() {
        let act = world.actuator_noise();
        let next = step_robot(&world.robots[i], commands[i], &cfg, current, act);
        world.robots[i] = next;
        world.robots[i].sensed = world.sense(&next.pose);
    }
    world.step += 1;
    let now = world.step;
    for (robot, entry) in world.robots.iter().zip(world.ledger.iter_mut()) {
        if now - entry.step >= BROADCAST_PERIOD_STEPS {
            entry.position = robot.sensed.position;
            entry.step = now;
        }
    }
}

/// How robots are scattered at the start of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// Uniform in an axis-aligned square, pairwise at least `min_separation` apart.
    Square {
        center: Vec2,
        side: f64,
        min_separation: f64,
    },
    /// Uniform in a square; every robot after the first must lie within
    /// `max_nearest` of an already placed robot.
    ChainedSquare {
        center: Vec2,
        side: f64,
        min_separation: f64,
        max_nearest: f64,
    },
}

impl Placement {
    pub fn center(&self) -> Vec2 {
        match *self {
            Placement::Square { center, .. } | Placement::ChainedSquare { center, .. } => center,
        }
    }

    pub fn with_center(self, c: Vec2) -> Self {
        match self {
            Placement::Square {
                side,
                min_separation,
                ..
            } => Placement::Square {
                center: c,
                side,
                min_separation,
            },
            Placement::ChainedSquare {
                side,
                min_separation,
                max_nearest,
                ..
            } => Placement::ChainedSquare {
                center: c,
                side,
                min_separation,
                max_nearest,
            },
        }
    }
}

const PLACEMENT_ATTEMPTS: usize = 2000;
const PLACEMENT_RESTARTS: usize = 20;

/// Draw `n` starting positions satisfying `placement`.
pub fn place_robots<R: Rng>(
    n: usize,
    placement: &Placement,
    rng: &mut R,
) -> Result<Vec<Vec2>, SetupError> {
    let (center, side, min_sep, max_nearest) = match *placement {
        Placement::Square {
            center,
            side,
            min_separation,
        } => (center, side, min_separation, f64::INFINITY),
        Placement::ChainedSquare {
            center,
            side,
            min_separation,
            max_nearest,
        } => (center, side, min_separation, max_nearest),
    };
    let half = side / 2.0;
    'restart: for _ in 0..PLACEMENT_RESTARTS {
        let mut placed: Vec<Vec2> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut ok = false;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let p = center
                    + Vec2::new(rng.gen_range(-half..=half), rng.gen_range(-half..=half));
                let far_enough = placed.iter().all(|q| q.distance(p) >= min_sep);
                let near_enough =
                    placed.is_empty() || placed.iter().any(|q| q.distance(p) <= max_nearest);
                if far_enough && near_enough {
                    placed.push(p);
                    ok = true;
                    break;
                }
            }
            if !ok {
                continue 'restart;
            }
        }
        return Ok(placed);
    }
    Err(SetupError(format!(
        "could not place {n} robots in a {side} m square with {min_sep} m separation"
    )))
}
