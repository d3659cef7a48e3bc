//! Sequential multi-behaviour missions with temperature sampling.
//!
//! A plan is a list of timed stages, each running one evolved controller on
//! every robot. Stage windows are half-open, `[start, end)`, and every
//! controller starts from a clean recurrent state when its stage begins.
//! While sampling is active each robot reads the water temperature once per
//! second; the readings are kriged into prediction and error maps at the
//! configured checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coverage::grid_to_text;
use crate::error::{ConfigError, Error, KrigingError, Result};
use crate::evolution::{derive_seed, SeedNamespace};
use crate::geometry::{GeoFence, Pose, Vec2};
use crate::kriging::{fit_variogram, krige, GridSpec, KrigedMaps, KrigingModel, Neighbourhood, Sample, Variogram};
use crate::neat::{self, Genome, NeatParams, Network};
use crate::scenario::{check_arity, log_states, Controller, Swarm, TrajectoryRow};
use crate::sensors::SensorConfig;
use crate::sim::{place_robots, step_time, Placement, SimConfig, WorldState, STEPS_PER_SECOND};
use crate::task::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub behavior: TaskKind,
    /// Controller file; relative paths are resolved against the plan file.
    pub genome: PathBuf,
    /// Seconds.
    pub duration: f64,
    /// Active waypoint during the stage (homing).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoint: Option<Vec2>,
    /// Monitoring area during the stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fence: Option<GeoFence>,
}

/// One Gaussian bump of the synthetic temperature field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub centre: Vec2,
    /// °C at the centre.
    pub amplitude: f64,
    /// Meters.
    pub sigma: f64,
}

/// Smooth ground-truth temperature: a base value plus Gaussian bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField {
    pub base: f64,
    pub bumps: Vec<Bump>,
}

impl Default for TemperatureField {
    fn default() -> Self {
        let bump = |x, y, amplitude, sigma| Bump {
            centre: Vec2::new(x, y),
            amplitude,
            sigma,
        };
        TemperatureField {
            base: 20.0,
            bumps: vec![
                bump(-25.0, 20.0, 2.0, 25.0),
                bump(30.0, -20.0, -1.5, 20.0),
                bump(20.0, 35.0, 1.0, 15.0),
            ],
        }
    }
}

impl TemperatureField {
    pub fn at(&self, p: Vec2) -> f64 {
        self.base
            + self
                .bumps
                .iter()
                .map(|b| b.amplitude * (-p.distance_sq(b.centre) / (2.0 * b.sigma * b.sigma)).exp())
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureSample {
    pub id: u32,
    pub position: Vec2,
    /// °C
    pub value: f64,
    /// Seconds.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionPlan {
    pub stages: Vec<Stage>,
    pub robots: usize,
    /// Start area around the base station.
    pub base: Vec2,
    pub start_side: f64,
    /// Area whose temperature is mapped.
    pub area: GeoFence,
    pub sampling_start: f64,
    /// Sampling stops here; defaults to the end of the last monitoring stage.
    pub sampling_end: Option<f64>,
    /// Times at which maps are produced.
    pub checkpoints: Vec<f64>,
    pub map_cell: f64,
    pub neighbourhood: Neighbourhood,
    /// Fixed variogram; fitted from the samples when absent.
    pub variogram: Option<Variogram>,
    pub field: TemperatureField,
    pub sim: SimConfig,
    pub sensors: SensorConfig,
}

fn default_area() -> GeoFence {
    GeoFence::rectangle(Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)).expect("valid square")
}

impl Default for MissionPlan {
    fn default() -> Self {
        MissionPlan::with_genomes(["homing.genome", "dispersion.genome", "monitoring.genome", "clustering.genome"])
    }
}

/// Status of the plan at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Active(usize),
    Complete,
}

impl MissionPlan {
    /// Default five-stage plan: homing to the area centre, dispersion,
    /// monitoring, clustering, homing back to base. Genome paths are given
    /// for homing, dispersion, monitoring and clustering.
    pub fn with_genomes<P: Into<PathBuf>>(genomes: [P; 4]) -> Self {
        let [homing, dispersion, monitoring, clustering] = genomes.map(Into::into);
        let area = default_area();
        let base = Vec2::new(0.0, -100.0);
        let stage = |behavior, genome: &PathBuf, duration| Stage {
            behavior,
            genome: genome.clone(),
            duration,
            waypoint: None,
            fence: None,
        };
        MissionPlan {
            stages: vec![
                Stage {
                    waypoint: Some(area.centroid()),
                    ..stage(TaskKind::Homing, &homing, 100.0)
                },
                stage(TaskKind::Dispersion, &dispersion, 60.0),
                Stage {
                    fence: Some(area.clone()),
                    ..stage(TaskKind::Monitoring, &monitoring, 200.0)
                },
                stage(TaskKind::Clustering, &clustering, 120.0),
                Stage {
                    waypoint: Some(base),
                    ..stage(TaskKind::Homing, &homing, 120.0)
                },
            ],
            robots: 8,
            base,
            start_side: 20.0,
            area,
            sampling_start: 100.0,
            sampling_end: None,
            checkpoints: vec![160.0, 260.0, 360.0],
            map_cell: 2.0,
            neighbourhood: Neighbourhood::default(),
            variogram: None,
            field: TemperatureField::default(),
            sim: SimConfig::default(),
            sensors: SensorConfig::default(),
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Stage start times.
    pub fn starts(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.stages
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    pub fn sampling_end(&self) -> f64 {
        self.sampling_end.unwrap_or_else(|| {
            let starts = self.starts();
            self.stages
                .iter()
                .zip(&starts)
                .filter(|(s, _)| s.behavior == TaskKind::Monitoring)
                .map(|(s, &t)| t + s.duration)
                .fold(self.total_duration(), |_, end| end)
        })
    }

    pub fn sampling_active(&self, t: f64) -> bool {
        t >= self.sampling_start && t < self.sampling_end()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.stages.is_empty() {
            return Err(ConfigError::Invalid("mission needs at least one stage".into()));
        }
        if let Some(s) = self.stages.iter().find(|s| !(s.duration > 0.0)) {
            return Err(ConfigError::Invalid(format!("stage duration must be positive, got {}", s.duration)));
        }
        if self.robots == 0 {
            return Err(ConfigError::Invalid("mission needs at least one robot".into()));
        }
        if !(self.map_cell > 0.0) {
            return Err(ConfigError::Invalid("map cell size must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let plan: MissionPlan = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("mission plan is always serializable")
    }

    /// Load a plan; relative genome paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = MissionPlan::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            for s in &mut plan.stages {
                if s.genome.is_relative() {
                    s.genome = dir.join(&s.genome);
                }
            }
        }
        Ok(plan)
    }

    /// Load every stage's controller, failing on the first missing file.
    pub fn load_genomes(&self) -> Result<Vec<Genome>> {
        self.stages
            .iter()
            .map(|s| {
                let g = neat::io::load(&s.genome)?;
                check_arity(&g)?;
                Ok(g)
            })
            .collect()
    }
}

/// Index of the stage whose window `[start, end)` contains `t`.
pub fn active_stage(plan: &MissionPlan, t: f64) -> StageStatus {
    let mut end = 0.0;
    for (i, s) in plan.stages.iter().enumerate() {
        end += s.duration;
        if t < end {
            return StageStatus::Active(i);
        }
    }
    StageStatus::Complete
}

#[derive(Debug, Clone)]
pub struct CheckpointMaps {
    pub time: f64,
    pub samples: usize,
    pub maps: KrigedMaps,
}

#[derive(Debug, Clone)]
pub struct MissionLog {
    /// Robot states at every step, one list per stage.
    pub trajectories: Vec<Vec<TrajectoryRow>>,
    pub samples: Vec<TemperatureSample>,
    pub variogram: Option<Variogram>,
    pub checkpoints: Vec<CheckpointMaps>,
    /// Ground truth on the map grid.
    pub truth: Option<KrigedMaps>,
}

fn map_grid(plan: &MissionPlan) -> GridSpec {
    let (min, max) = plan.area.bounds();
    GridSpec::covering(min, max, plan.map_cell)
}

/// Execute a plan with one controller per stage.
pub fn run_mission(plan: &MissionPlan, genomes: &[Genome], seed: u64) -> Result<MissionLog> {
    plan.validate()?;
    if genomes.len() != plan.stages.len() {
        return Err(ConfigError::Invalid(format!(
            "{} stages but {} controllers",
            plan.stages.len(),
            genomes.len()
        ))
        .into());
    }
    for g in genomes {
        check_arity(g)?;
    }
    let slope = NeatParams::default().sigmoid_slope;

    let mut world = WorldState::new(plan.sim, derive_seed(seed, SeedNamespace::Mission, 0, 0, 0));
    world.draw_current();
    let placement = Placement::Square {
        center: plan.base,
        side: plan.start_side,
        min_separation: 3.0,
    };
    let mut swarm = Swarm::new(world, plan.sensors);
    let starts = place_robots(plan.robots, &placement, swarm.world.rng_mut())?;
    for p in starts {
        let heading = rand::Rng::gen_range(swarm.world.rng_mut(), 0.0..360.0);
        swarm.add(Pose::new(p, heading), Controller::GoTo { target: p });
    }

    let steps = (plan.total_duration() * STEPS_PER_SECOND as f64).round() as u64;
    let mut trajectories = vec![Vec::new(); plan.stages.len()];
    let mut samples = Vec::new();
    let mut current: Option<usize> = None;

    for step in 0..steps {
        let t = step_time(step);
        let StageStatus::Active(k) = active_stage(plan, t) else {
            break;
        };
        if current != Some(k) {
            let stage = &plan.stages[k];
            let net = Network::from_genome(&genomes[k], slope);
            for c in &mut swarm.controllers {
                *c = Controller::Network(net.clone());
            }
            swarm.world.waypoints = stage.waypoint.into_iter().collect();
            swarm.world.active_waypoint = 0;
            swarm.world.fence = stage.fence.clone();
            current = Some(k);
        }
        log_states(&swarm.world, &mut trajectories[k]);
        if step % STEPS_PER_SECOND == 0 && plan.sampling_active(t) {
            for r in swarm.world.robots() {
                samples.push(TemperatureSample {
                    id: r.id,
                    position: r.sensed.position,
                    value: plan.field.at(r.pose.position),
                    timestamp: t,
                });
            }
        }
        swarm.step();
    }

    let (variogram, checkpoints) = map_checkpoints(plan, &samples)?;
    let grid = map_grid(plan);
    let truth = {
        let mut pred = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.cell_centre(i % grid.cols, i / grid.cols);
            pred.push(if plan.area.contains(x) { plan.field.at(x) } else { f64::NAN });
        }
        let zeros = pred.iter().map(|v| if v.is_nan() { f64::NAN } else { 0.0 }).collect();
        Some(KrigedMaps {
            grid,
            prediction: pred,
            error_std: zeros,
        })
    };
    Ok(MissionLog {
        trajectories,
        samples,
        variogram,
        checkpoints,
        truth,
    })
}

/// Krige the samples available at each checkpoint. The variogram is fitted
/// once, from the samples at the last checkpoint, and shared by all maps.
pub fn map_checkpoints(
    plan: &MissionPlan,
    samples: &[TemperatureSample],
) -> Result<(Option<Variogram>, Vec<CheckpointMaps>)> {
    let upto = |t: f64| -> Vec<Sample> {
        samples
            .iter()
            .filter(|s| s.timestamp <= t)
            .map(|s| Sample::new(s.position, s.value))
            .collect()
    };
    let last = plan.checkpoints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let variogram = match plan.variogram {
        Some(v) => Some(v),
        None => match fit_variogram(&upto(last)) {
            Ok(m) => Some(m.variogram),
            Err(KrigingError::TooFewSamples { .. }) if plan.checkpoints.is_empty() => None,
            Err(e) => return Err(e.into()),
        },
    };
    let grid = map_grid(plan);
    let mut out = Vec::new();
    for &t in &plan.checkpoints {
        let s = upto(t);
        let (Some(v), false) = (variogram, s.is_empty()) else {
            continue;
        };
        let model = KrigingModel::new(v, &s)?;
        let area = &plan.area;
        out.push(CheckpointMaps {
            time: t,
            samples: s.len(),
            maps: krige(&model, grid, plan.neighbourhood, |x| area.contains(x)),
        });
    }
    Ok((variogram, out))
}

pub fn samples_csv(samples: &[TemperatureSample]) -> String {
    let mut s = String::from("t,id,x,y,value\n");
    for r in samples {
        let _ = writeln!(s, "{},{},{},{},{}", r.timestamp, r.id, r.position.x, r.position.y, r.value);
    }
    s
}

impl MissionLog {
    /// Write trajectories, samples and map grids into `dir`. Returns the
    /// written paths.
    pub fn save(&self, plan: &MissionPlan, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut write = |name: String, text: String| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            written.push(p);
            Ok(())
        };
        for (k, (stage, rows)) in plan.stages.iter().zip(&self.trajectories).enumerate() {
            write(
                format!("stage_{k}_{}.csv", stage.behavior),
                crate::scenario::trajectory_csv(rows),
            )?;
        }
        write("samples.csv".into(), samples_csv(&self.samples))?;
        if let Some(v) = self.variogram {
            write(
                "variogram.toml".into(),
                toml::to_string(&v).expect("variogram is always serializable"),
            )?;
        }
        let grid_text = |m: &KrigedMaps, values: &[f64]| {
            grid_to_text(m.grid.origin, m.grid.cell_size, m.grid.cols, m.grid.rows, values)
        };
        for c in &self.checkpoints {
            let t = c.time.round() as i64;
            write(format!("prediction_{t:04}.grid"), grid_text(&c.maps, &c.maps.prediction))?;
            write(format!("error_std_{t:04}.grid"), grid_text(&c.maps, &c.maps.error_std))?;
        }
        if let Some(truth) = &self.truth {
            write("truth.grid".into(), grid_text(truth, &truth.prediction))?;
        }
        Ok(written)
    }
}
