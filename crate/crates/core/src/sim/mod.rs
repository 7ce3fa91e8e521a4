//! Synthetic headset and robot driving the engine over the real session
//! layer with a simulated clock, plus parameter sweeps and log replay.

mod agent;
mod episode;
mod replay;
mod sweep;

pub use agent::{Agent, AgentParams, MAX_SAMPLE_HZ};
pub use episode::{run_episode, EpisodeOutcome, EpisodeSpec, MetricsRow};
pub use replay::{replay, replay_file, DivergenceError, ReplayError, ReplayReport};
pub use sweep::{episode_seed, run_sweep, sweep_rows, write_csv, SweepSummary, CSV_HEADER};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigError;
use crate::engine::{EngineConfig, Mode, Poi};
use crate::geometry::{RigidTransform, Vec3};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("episode {episode_id} did not finish within {limit_ms} ms of simulated time")]
    Stalled { episode_id: u64, limit_ms: u64 },
    #[error("engine rejected {what}: {code}: {msg}")]
    Rejected {
        what: &'static str,
        code: String,
        msg: String,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Sweep definition. The agent and engine parameters come from their own
/// config sections and are filled in by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub delta_d_grid: Vec<f64>,
    pub delta_t_grid: Vec<u64>,
    pub episodes_per_cell: u32,
    pub mode: Mode,
    pub world: Vec<Poi>,
    /// Ground-truth pose of the robot frame in the world frame.
    pub robot_to_world: RigidTransform,
    /// Gaze streamed before the episode starts.
    pub warmup_ms: u64,
    /// Simulated-time budget per episode.
    pub max_episode_ms: u64,
    #[serde(skip)]
    pub agent: AgentParams,
    #[serde(skip)]
    pub engine: EngineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            delta_d_grid: vec![0.5, 1.0],
            delta_t_grid: vec![500, 1000],
            episodes_per_cell: 10,
            mode: Mode::ConfirmationGated,
            world: default_world(),
            robot_to_world: RigidTransform::from_axis_angle(
                Vec3::Y,
                30f64.to_radians(),
                Vec3::new(1.5, 0.0, -2.0),
            ),
            warmup_ms: 500,
            max_episode_ms: 600_000,
            agent: AgentParams::default(),
            engine: EngineConfig::default(),
        }
    }
}

fn default_world() -> Vec<Poi> {
    vec![
        Poi::new("crate", Vec3::new(1.2, 1.0, 4.0), "supply crate"),
        Poi::new("door", Vec3::new(-2.0, 1.6, 3.5), "side door"),
    ]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.delta_d_grid.is_empty() {
            return Err(ConfigError::invalid(
                "experiment.delta_d_grid",
                "must not be empty",
            ));
        }
        if let Some(d) = self
            .delta_d_grid
            .iter()
            .find(|d| !(d.is_finite() && **d > 0.0))
        {
            return Err(ConfigError::invalid(
                "experiment.delta_d_grid",
                format!("spacings must be > 0, got {d}"),
            ));
        }
        if self.delta_t_grid.is_empty() {
            return Err(ConfigError::invalid(
                "experiment.delta_t_grid",
                "must not be empty",
            ));
        }
        if self.delta_t_grid.contains(&0) {
            return Err(ConfigError::invalid(
                "experiment.delta_t_grid",
                "intervals must be > 0",
            ));
        }
        if self.episodes_per_cell == 0 {
            return Err(ConfigError::invalid(
                "experiment.episodes_per_cell",
                "must be >= 1",
            ));
        }
        if self.world.is_empty() {
            return Err(ConfigError::invalid(
                "experiment.world",
                "needs at least one POI",
            ));
        }
        if let Some(p) = self.world.iter().find(|p| !p.position.is_finite()) {
            return Err(ConfigError::invalid(
                "experiment.world",
                format!("POI {:?} has a non-finite position", p.id),
            ));
        }
        if self.max_episode_ms == 0 {
            return Err(ConfigError::invalid(
                "experiment.max_episode_ms",
                "must be > 0",
            ));
        }
        Ok(())
    }

    /// Engine config for one grid cell.
    pub fn cell_engine(&self, delta_d_m: f64, delta_t_ms: u64) -> EngineConfig {
        EngineConfig {
            delta_d_m,
            delta_t_ms,
            mode: self.mode,
            ..self.engine.clone()
        }
    }
}
