//! Experiment runner for evolved swarm controllers.
//!
//! Subcommands: `evolve`, `posteval`, `select`, `replay`, `mission` and
//! `plot`. Outputs go under `--out-dir`, which defaults to
//! `$SWARMEVO_OUT_DIR` or `results`.

pub mod commands;
pub mod plot;

pub use commands::{run, Cli, Command};
