//! Simulation and neuroevolution toolkit for swarms of aquatic surface robots.
//!
//! The crate covers the whole controller-synthesis pipeline:
//!
//! * [`sim`]: a seeded 100 ms kinematic stepper with noise, water current and
//!   a 1 Hz position-broadcast ledger;
//! * [`sensors`]: the 11 normalised controller inputs;
//! * [`neat`]: NEAT genomes, speciation and network activation;
//! * [`fitness`] and [`coverage`]: task scoring for homing, dispersion,
//!   clustering and area monitoring;
//! * [`evolution`]: multi-trial evaluation, generational runs, post-evaluation
//!   and controller selection;
//! * [`scenario`]: fixed replay scenarios with timed events and metrics;
//! * [`mission`] and [`kriging`]: sequential multi-behaviour missions with
//!   temperature sampling and field reconstruction.

pub mod coverage;
pub mod error;
pub mod evolution;
pub mod fitness;
pub mod geometry;
pub mod kriging;
pub mod mission;
pub mod neat;
pub mod scenario;
pub mod sensors;
pub mod sim;
pub mod task;

pub use error::{Error, Result};
pub use geometry::{GeoFence, Pose, Vec2};
pub use neat::{Genome, NeatParams, Network};
pub use sensors::{SensorConfig, SensorFrame};
pub use sim::{ActuationCommand, SimConfig, WorldState};
pub use task::{TaskConfig, TaskKind};
