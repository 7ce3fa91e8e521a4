use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::gaze::{DwellParams, FixationParams};

/// How markers advance along a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Advance only after the current marker has been looked at.
    #[default]
    ConfirmationGated,
    /// Advance every Δt regardless of confirmation.
    Scheduled,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ConfirmationGated => "confirmation_gated",
            Mode::Scheduled => "scheduled",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "confirmation_gated" | "gated" => Ok(Mode::ConfirmationGated),
            "scheduled" => Ok(Mode::Scheduled),
            other => Err(ConfigError::invalid(
                "mode",
                format!("unknown mode {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub dwell_ms: u64,
    pub gap_tolerance_ms: u64,
    pub timeout_ms: u64,
    pub max_timeouts: u32,
    pub delta_d_m: f64,
    /// Fixed interval, or the starting interval for the adaptive policy.
    pub delta_t_ms: u64,
    pub adaptive_interval: bool,
    pub delta_t_min_ms: u64,
    pub delta_t_max_ms: u64,
    pub ewma_alpha: f64,
    pub beta: f64,
    pub marker_half_extent_m: f64,
    pub eccentricity_deg: f64,
    pub mode: Mode,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub fixation_window_ms: u64,
    pub dispersion_threshold_deg: f64,
    /// A fixation counts as current if it ended at most this long before
    /// the newest gaze sample.
    pub fixation_recency_ms: u64,
    pub default_reference_depth_m: f64,
    pub track_capacity: usize,
    pub smoothing: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dwell_ms: 250,
            gap_tolerance_ms: 50,
            timeout_ms: 5000,
            max_timeouts: 3,
            delta_d_m: 1.0,
            delta_t_ms: 1000,
            adaptive_interval: true,
            delta_t_min_ms: 200,
            delta_t_max_ms: 3000,
            ewma_alpha: 0.5,
            beta: 1.2,
            marker_half_extent_m: 0.15,
            eccentricity_deg: 8.0,
            mode: Mode::ConfirmationGated,
            hfov_deg: 43.0,
            vfov_deg: 29.0,
            fixation_window_ms: 150,
            dispersion_threshold_deg: 1.5,
            fixation_recency_ms: 500,
            default_reference_depth_m: 2.0,
            track_capacity: 512,
            smoothing: false,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("engine.delta_d_m", self.delta_d_m)?;
        positive("engine.beta", self.beta)?;
        positive("engine.marker_half_extent_m", self.marker_half_extent_m)?;
        positive(
            "engine.default_reference_depth_m",
            self.default_reference_depth_m,
        )?;
        positive(
            "engine.dispersion_threshold_deg",
            self.dispersion_threshold_deg,
        )?;
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(ConfigError::invalid(
                "engine.ewma_alpha",
                "must lie in (0, 1]",
            ));
        }
        if self.delta_t_min_ms == 0 || self.delta_t_min_ms > self.delta_t_max_ms {
            return Err(ConfigError::invalid(
                "engine.delta_t_min_ms",
                "need 0 < delta_t_min_ms <= delta_t_max_ms",
            ));
        }
        if self.delta_t_ms == 0 {
            return Err(ConfigError::invalid("engine.delta_t_ms", "must be > 0"));
        }
        if self.timeout_ms == 0 {
            return Err(ConfigError::invalid("engine.timeout_ms", "must be > 0"));
        }
        if self.max_timeouts == 0 {
            return Err(ConfigError::invalid("engine.max_timeouts", "must be >= 1"));
        }
        for (name, fov) in [
            ("engine.hfov_deg", self.hfov_deg),
            ("engine.vfov_deg", self.vfov_deg),
        ] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(ConfigError::invalid(name, "must lie in (0, 180)"));
            }
        }
        if !(self.eccentricity_deg > 0.0 && self.eccentricity_deg < 90.0) {
            return Err(ConfigError::invalid(
                "engine.eccentricity_deg",
                "must lie in (0, 90)",
            ));
        }
        if self.track_capacity < 5 {
            return Err(ConfigError::invalid(
                "engine.track_capacity",
                "must be >= 5",
            ));
        }
        Ok(())
    }

    pub fn dwell_params(&self) -> DwellParams {
        DwellParams {
            dwell_ms: self.dwell_ms,
            gap_tolerance_ms: self.gap_tolerance_ms,
        }
    }

    pub fn fixation_params(&self) -> FixationParams {
        FixationParams {
            window_ms: self.fixation_window_ms,
            dispersion_threshold_deg: self.dispersion_threshold_deg,
        }
    }
}
