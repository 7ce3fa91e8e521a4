//! Gaze stream processing: sample buffering, gaze-point velocity,
//! fixation detection and dwell confirmation.

mod dwell;
mod fixation;

pub use dwell::{update_dwell, DwellParams, DwellState};
pub use fixation::{detect_fixation, fixations, window_dispersion, FixationEvent, FixationParams};

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{point_at, GeometryError, Ray, Vec3};

pub const DEFAULT_TRACK_CAPACITY: usize = 512;
pub const DEFAULT_REFERENCE_DEPTH_M: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GazeError {
    #[error("need at least {needed} samples, have {have}")]
    InsufficientSamples { needed: usize, have: usize },
    #[error("gaze depth must be finite and > 0, got {0}")]
    InvalidDepth(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    /// Microseconds since the session epoch.
    pub ts_us: i64,
    pub ray: Ray,
}

impl GazeSample {
    pub fn new(ts_us: i64, ray: Ray) -> Self {
        GazeSample { ts_us, ray }
    }
}

/// Bounded, strictly time-ordered buffer of gaze samples.
#[derive(Debug, Clone)]
pub struct GazeTrack {
    samples: VecDeque<GazeSample>,
    capacity: usize,
    reference_depth_m: f64,
}

impl Default for GazeTrack {
    fn default() -> Self {
        GazeTrack::new(DEFAULT_TRACK_CAPACITY)
    }
}

impl GazeTrack {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        GazeTrack {
            samples: VecDeque::with_capacity(capacity),
            capacity,
            reference_depth_m: DEFAULT_REFERENCE_DEPTH_M,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reference_depth_m(&self) -> f64 {
        self.reference_depth_m
    }

    pub fn set_reference_depth(&mut self, depth_m: f64) -> Result<(), GazeError> {
        if !depth_m.is_finite() || depth_m <= 0.0 {
            return Err(GazeError::InvalidDepth(depth_m));
        }
        self.reference_depth_m = depth_m;
        Ok(())
    }

    pub fn latest(&self) -> Option<&GazeSample> {
        self.samples.back()
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &GazeSample> + DoubleEndedIterator {
        self.samples.iter()
    }

    pub fn get(&self, i: usize) -> Option<&GazeSample> {
        self.samples.get(i)
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

/// Appends `s` when it is strictly newer than the last sample; evicts the
/// oldest sample at capacity. Returns whether the sample was kept.
pub fn push_sample(track: &mut GazeTrack, s: GazeSample) -> bool {
    if let Some(last) = track.samples.back() {
        if s.ts_us <= last.ts_us {
            return false;
        }
    }
    if track.samples.len() == track.capacity {
        track.samples.pop_front();
    }
    track.samples.push_back(s);
    true
}

/// The point `depth_m` along the gaze ray.
pub fn gaze_point(s: &GazeSample, depth_m: f64) -> Result<Vec3, GazeError> {
    if !depth_m.is_finite() || depth_m <= 0.0 {
        return Err(GazeError::InvalidDepth(depth_m));
    }
    Ok(point_at(&s.ray, depth_m)?)
}

/// Velocity of the gaze point at the track's reference depth, m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeKinematics {
    pub ts_us: i64,
    pub velocity: Vec3,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KinematicsOptions {
    /// Width-3 boxcar over gaze points before differencing.
    pub smoothing: bool,
}

/// Central difference over the two neighbours of the newest interior sample.
pub fn estimate_kinematics(track: &GazeTrack) -> Result<GazeKinematics, GazeError> {
    estimate_kinematics_with(track, KinematicsOptions::default())
}

pub fn estimate_kinematics_with(
    track: &GazeTrack,
    opts: KinematicsOptions,
) -> Result<GazeKinematics, GazeError> {
    let needed = if opts.smoothing { 5 } else { 3 };
    let n = track.len();
    if n < needed {
        return Err(GazeError::InsufficientSamples { needed, have: n });
    }
    let depth = track.reference_depth_m;
    let point = |i: usize| gaze_point(&track.samples[i], depth);
    let ts = |i: usize| track.samples[i].ts_us;

    let (before, after, centre, p_before, p_after) = if opts.smoothing {
        let smooth = |i: usize| -> Result<Vec3, GazeError> {
            Ok((point(i - 1)? + point(i)? + point(i + 1)?) / 3.0)
        };
        (n - 4, n - 2, n - 3, smooth(n - 4)?, smooth(n - 2)?)
    } else {
        (n - 3, n - 1, n - 2, point(n - 3)?, point(n - 1)?)
    };
    let dt_s = (ts(after) - ts(before)) as f64 / 1e6;
    let velocity = (p_after - p_before) / dt_s;
    Ok(GazeKinematics {
        ts_us: ts(centre),
        velocity,
        speed: velocity.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ts: i64, dir: Vec3) -> GazeSample {
        GazeSample::new(ts, Ray::new(Vec3::ZERO, dir).unwrap())
    }

    #[test]
    fn push_ordering() {
        let mut t = GazeTrack::default();
        assert!(push_sample(&mut t, sample(10, Vec3::Z)));
        assert!(!push_sample(&mut t, sample(10, Vec3::Z)));
        assert!(!push_sample(&mut t, sample(5, Vec3::Z)));
        assert!(push_sample(&mut t, sample(11, Vec3::Z)));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn capacity_eviction() {
        let mut t = GazeTrack::new(512);
        for i in 0..600 {
            assert!(push_sample(&mut t, sample(i, Vec3::Z)));
        }
        assert_eq!(t.len(), 512);
        assert_eq!(t.get(0).unwrap().ts_us, 88);
        assert_eq!(t.latest().unwrap().ts_us, 599);
    }

    #[test]
    fn gaze_point_depth() {
        let s = sample(0, Vec3::Z);
        assert_eq!(gaze_point(&s, 2.0).unwrap(), Vec3::new(0.0, 0.0, 2.0));
        assert!(gaze_point(&s, 0.0).is_err());
        assert!(gaze_point(&s, -1.0).is_err());
        let o = GazeSample::new(
            0,
            Ray::new(Vec3::new(1.0, 1.6, -2.0), Vec3::new(0.3, -0.2, 0.9)).unwrap(),
        );
        let p = gaze_point(&o, 3.7).unwrap();
        assert!(((p - o.ray.origin()).norm() - 3.7).abs() < 1e-9);
    }

    #[test]
    fn kinematics_needs_three() {
        let mut t = GazeTrack::default();
        push_sample(&mut t, sample(0, Vec3::Z));
        push_sample(&mut t, sample(1, Vec3::Z));
        assert_eq!(
            estimate_kinematics(&t),
            Err(GazeError::InsufficientSamples { needed: 3, have: 2 })
        );
    }

    #[test]
    fn stationary_gaze_has_zero_velocity() {
        let mut t = GazeTrack::default();
        for i in 0..4 {
            push_sample(&mut t, sample(i * 10_000, Vec3::new(0.1, 0.2, 1.0)));
        }
        let k = estimate_kinematics(&t).unwrap();
        assert_eq!(k.velocity, Vec3::ZERO);
        assert_eq!(k.speed, 0.0);
        assert_eq!(k.ts_us, 20_000);
    }

    #[test]
    fn smoothing_keeps_linear_motion_exact() {
        let mut t = GazeTrack::default();
        for i in 0..6i64 {
            let ts = i * 10_000;
            let target = Vec3::new(ts as f64 / 1e6, 0.0, 2.0);
            // Origin slides so the point at depth 2 moves at 1 m/s along x.
            let s = GazeSample::new(ts, Ray::new(target - Vec3::Z * 2.0, Vec3::Z).unwrap());
            push_sample(&mut t, s);
        }
        let k = estimate_kinematics_with(&t, KinematicsOptions { smoothing: true }).unwrap();
        assert!((k.velocity - Vec3::X).norm() < 1e-9);
    }
}
