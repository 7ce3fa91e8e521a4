//! Gaze-contingent attention guidance: ray and frame geometry, gaze
//! processing, the marker-chain engine, its wire protocol and a simulated
//! headset for unattended experiments.

pub mod config;
pub mod engine;
pub mod gaze;
pub mod geometry;
pub mod protocol;
pub mod sim;

pub use config::{CliConfig, ConfigError};
