use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::gaze::GazeSample;
use crate::geometry::{angular_distance, frustum_contains, rotate_toward, Frustum, Ray, Vec3};
use crate::protocol::Body;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    pub latency_ms: u64,
    pub saccade_speed_dps: f64,
    pub jitter_sigma_deg: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub head_lag_tau_ms: u64,
    pub sample_hz: u32,
    pub seed: u64,
    pub eye_height_m: f64,
    /// Initial heading. Yaw turns about +Y from +Z toward +X; pitch is up.
    pub start_yaw_deg: f64,
    pub start_pitch_deg: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            latency_ms: 200,
            saccade_speed_dps: 300.0,
            jitter_sigma_deg: 0.5,
            fov_h_deg: 43.0,
            fov_v_deg: 29.0,
            head_lag_tau_ms: 300,
            sample_hz: 60,
            seed: 0,
            eye_height_m: 1.6,
            start_yaw_deg: 0.0,
            start_pitch_deg: 0.0,
        }
    }
}

/// The hub's gaze rate limit; faster agents would be throttled.
pub const MAX_SAMPLE_HZ: u32 = 120;

impl AgentParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("agent.saccade_speed_dps", self.saccade_speed_dps),
            ("agent.fov_h_deg", self.fov_h_deg),
            ("agent.fov_v_deg", self.fov_v_deg),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(field, format!("must be > 0, got {v}")));
            }
        }
        if self.fov_h_deg >= 180.0 || self.fov_v_deg >= 180.0 {
            return Err(ConfigError::invalid("agent.fov", "must be < 180°"));
        }
        if !(self.jitter_sigma_deg.is_finite() && self.jitter_sigma_deg >= 0.0) {
            return Err(ConfigError::invalid(
                "agent.jitter_sigma_deg",
                "must be >= 0",
            ));
        }
        if self.sample_hz == 0 || self.sample_hz > MAX_SAMPLE_HZ {
            return Err(ConfigError::invalid(
                "agent.sample_hz",
                format!("must be in 1..={MAX_SAMPLE_HZ}"),
            ));
        }
        if !self.eye_height_m.is_finite() {
            return Err(ConfigError::invalid("agent.eye_height_m", "must be finite"));
        }
        if !(self.start_pitch_deg.abs() < 90.0 && self.start_yaw_deg.is_finite()) {
            return Err(ConfigError::invalid(
                "agent.start",
                "pitch must be in (-90, 90)",
            ));
        }
        Ok(())
    }

    /// Sample period, rounded to whole microseconds.
    pub fn dt_us(&self) -> i64 {
        (1e6 / self.sample_hz as f64).round() as i64
    }

    pub fn eye(&self) -> Vec3 {
        Vec3::new(0.0, self.eye_height_m, 0.0)
    }

    pub fn start_direction(&self) -> Vec3 {
        let (yaw, pitch) = (
            self.start_yaw_deg.to_radians(),
            self.start_pitch_deg.to_radians(),
        );
        Vec3::new(
            yaw.sin() * pitch.cos(),
            pitch.sin(),
            yaw.cos() * pitch.cos(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Target {
    id: u64,
    center: Vec3,
    shown_us: i64,
    /// When the current target was first inside the head frustum.
    seen_us: Option<i64>,
}

/// Synthetic observer: constant-speed saccades toward the visible marker
/// after a reaction latency, a head that trails the eyes, and Gaussian
/// angular jitter on the reported direction.
#[derive(Debug, Clone)]
pub struct Agent {
    params: AgentParams,
    origin: Vec3,
    gaze: Vec3,
    head: Vec3,
    target: Option<Target>,
    jitter: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    last_emitted: Option<Vec3>,
    scanpath_deg: f64,
}

impl Agent {
    pub fn new(params: AgentParams) -> Result<Self, ConfigError> {
        params.validate()?;
        let jitter = if params.jitter_sigma_deg > 0.0 {
            Some(
                Normal::new(0.0, params.jitter_sigma_deg)
                    .map_err(|e| ConfigError::invalid("agent.jitter_sigma_deg", e.to_string()))?,
            )
        } else {
            None
        };
        let dir = params.start_direction();
        Ok(Agent {
            origin: params.eye(),
            gaze: dir,
            head: dir,
            target: None,
            jitter,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            last_emitted: None,
            scanpath_deg: 0.0,
            params,
        })
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    /// Noise-free gaze direction.
    pub fn gaze(&self) -> Vec3 {
        self.gaze
    }

    pub fn head(&self) -> Vec3 {
        self.head
    }

    pub fn set_gaze(&mut self, dir: Vec3) {
        if let Ok(d) = dir.normalized() {
            self.gaze = d;
        }
    }

    pub fn set_head(&mut self, dir: Vec3) {
        if let Ok(d) = dir.normalized() {
            self.head = d;
        }
    }

    /// Angular length of the emitted scanpath so far.
    pub fn scanpath_deg(&self) -> f64 {
        self.scanpath_deg
    }

    pub fn reset_scanpath(&mut self) {
        self.scanpath_deg = 0.0;
    }

    pub fn target_id(&self) -> Option<u64> {
        self.target.map(|t| t.id)
    }

    fn head_frustum(&self) -> Option<Frustum> {
        Frustum::looking_along(
            self.origin,
            self.head,
            self.params.fov_h_deg,
            self.params.fov_v_deg,
        )
        .ok()
    }

    fn in_view(&self, p: Vec3) -> bool {
        self.head_frustum().is_some_and(|f| frustum_contains(&f, p))
    }

    /// Shows a marker at `center` from time `at_us`.
    pub fn show_marker(&mut self, id: u64, center: Vec3, at_us: i64) {
        let seen_us = self.in_view(center).then_some(at_us);
        self.target = Some(Target {
            id,
            center,
            shown_us: at_us,
            seen_us,
        });
    }

    pub fn hide_marker(&mut self, id: u64) {
        if self.target.is_some_and(|t| t.id == id) {
            self.target = None;
        }
    }

    /// Applies a headset-bound protocol message received at `at_us`.
    pub fn on_message(&mut self, body: &Body, at_us: i64) {
        match body {
            Body::MarkerPlace { marker_id, pos, .. } | Body::MarkerMove { marker_id, pos } => {
                self.show_marker(*marker_id, pos.0, at_us)
            }
            Body::MarkerRemove { marker_id } => self.hide_marker(*marker_id),
            _ => {}
        }
    }

    /// Advances the agent to `t_us` by one period of `dt_us` and returns the
    /// sample it reports.
    pub fn step(&mut self, t_us: i64, dt_us: i64) -> GazeSample {
        let dt_s = dt_us as f64 / 1e6;
        if let Some(mut target) = self.target {
            if self.in_view(target.center) {
                target.seen_us.get_or_insert(t_us.max(target.shown_us));
            } else {
                target.seen_us = None;
            }
            self.target = Some(target);
            let ready = target
                .seen_us
                .is_some_and(|s| t_us - s >= self.params.latency_ms as i64 * 1000);
            if ready {
                if let Ok(to) = (target.center - self.origin).normalized() {
                    self.gaze = rotate_toward(self.gaze, to, self.params.saccade_speed_dps * dt_s);
                }
            }
        }

        let lag = angular_distance(self.head, self.gaze);
        if lag > 0.0 {
            let alpha = 1.0 - (-dt_s * 1000.0 / self.params.head_lag_tau_ms.max(1) as f64).exp();
            self.head = rotate_toward(self.head, self.gaze, lag * alpha);
        }

        let emitted = self.jittered(self.gaze);
        if let Some(prev) = self.last_emitted {
            self.scanpath_deg += angular_distance(prev, emitted);
        }
        self.last_emitted = Some(emitted);
        let ray = Ray::new(self.origin, emitted).expect("unit direction from a finite origin");
        GazeSample::new(t_us, ray)
    }

    fn jittered(&mut self, dir: Vec3) -> Vec3 {
        let Some(normal) = self.jitter else {
            return dir;
        };
        let right = Vec3::Y.cross(dir);
        let right = if right.norm() < 1e-9 {
            dir.any_perpendicular()
        } else {
            right / right.norm()
        };
        let up = dir.cross(right);
        let a = normal.sample(&mut self.rng).to_radians();
        let b = normal.sample(&mut self.rng).to_radians();
        let d = dir + right * a.tan() + up * b.tan();
        d / d.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> AgentParams {
        AgentParams {
            jitter_sigma_deg: 0.0,
            ..AgentParams::default()
        }
    }

    #[test]
    fn aligns_after_latency_in_two_samples() {
        let p = quiet();
        let dt = p.dt_us();
        let mut a = Agent::new(p.clone()).unwrap();
        let target_dir = Vec3::Z.rotated_about(Vec3::Y, 10f64.to_radians());
        a.show_marker(1, a.origin() + target_dir * 3.0, 0);
        let mut t = 0;
        let mut moved_at = None;
        let mut aligned_at = None;
        for k in 1..100 {
            t = k * dt;
            let before = a.gaze();
            a.step(t, dt);
            if moved_at.is_none() && a.gaze() != before {
                moved_at = Some(k);
            }
            if aligned_at.is_none() && angular_distance(a.gaze(), target_dir) < 1e-9 {
                aligned_at = Some(k);
            }
        }
        let moved = moved_at.unwrap();
        assert!(moved * dt >= p.latency_ms as i64 * 1000);
        assert_eq!(aligned_at.unwrap() - moved + 1, 2);
        assert!(t > 0);
    }

    #[test]
    fn ignores_marker_outside_view() {
        let mut a = Agent::new(quiet()).unwrap();
        a.show_marker(1, a.origin() - Vec3::Z * 3.0, 0);
        let g0 = a.gaze();
        for k in 1..200 {
            a.step(k * 16_667, 16_667);
        }
        assert_eq!(a.gaze(), g0);
        assert_eq!(a.scanpath_deg(), 0.0);
    }

    #[test]
    fn jitter_is_seeded() {
        let p = AgentParams {
            seed: 9,
            ..AgentParams::default()
        };
        let run = |p: &AgentParams| {
            let mut a = Agent::new(p.clone()).unwrap();
            (1..50)
                .map(|k| a.step(k * 16_667, 16_667).ray.direction())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(&p), run(&p));
        let other = AgentParams {
            seed: 10,
            ..p.clone()
        };
        assert_ne!(run(&p), run(&other));
    }

    #[test]
    fn head_trails_gaze() {
        let mut a = Agent::new(quiet()).unwrap();
        a.set_gaze(Vec3::Z.rotated_about(Vec3::Y, 0.3));
        a.step(16_667, 16_667);
        let lag = angular_distance(a.head(), a.gaze());
        assert!(lag > 0.0 && lag < 0.3f64.to_degrees());
    }

    #[test]
    fn rejects_bad_rate() {
        let p = AgentParams {
            sample_hz: 500,
            ..AgentParams::default()
        };
        assert!(p.validate().is_err());
    }
}
