use serde::{Deserialize, Serialize};

use super::{GazeSample, GazeTrack};
use crate::geometry::{angular_distance, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationParams {
    pub window_ms: u64,
    pub dispersion_threshold_deg: f64,
}

impl Default for FixationParams {
    fn default() -> Self {
        FixationParams {
            window_ms: 150,
            dispersion_threshold_deg: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationEvent {
    pub start_us: i64,
    pub end_us: i64,
    /// Normalized mean gaze direction over the fixation.
    pub centroid_dir: Vec3,
    /// Largest pairwise angle between directions in the fixation.
    pub dispersion_deg: f64,
    /// Mean gaze origin over the fixation.
    pub origin: Vec3,
}

/// Maximum pairwise angular distance among the sample directions.
pub fn window_dispersion(samples: &[GazeSample]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            worst = worst.max(angular_distance(a.ray.direction(), b.ray.direction()));
        }
    }
    worst
}

fn make_event(samples: &[GazeSample], dispersion_deg: f64) -> FixationEvent {
    let n = samples.len() as f64;
    let (mut dir, mut origin) = (Vec3::ZERO, Vec3::ZERO);
    for s in samples {
        dir += s.ray.direction();
        origin += s.ray.origin();
    }
    // Directions within a few degrees never cancel out.
    let centroid_dir = dir / dir.norm();
    FixationEvent {
        start_us: samples[0].ts_us,
        end_us: samples[samples.len() - 1].ts_us,
        centroid_dir,
        dispersion_deg,
        origin: origin / n,
    }
}

/// Dispersion-threshold identification over a time-ordered sample slice.
///
/// A window opens at the earliest sample, spans at least `window_ms`, and is
/// grown sample by sample while the dispersion stays within the threshold.
/// Windows that fail the threshold slide forward by one sample.
pub fn fixations(samples: &[GazeSample], params: FixationParams) -> Vec<FixationEvent> {
    let window_us = params.window_ms as i64 * 1000;
    let thr = params.dispersion_threshold_deg;
    let n = samples.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let Some(end) = (start..n).find(|&j| samples[j].ts_us - samples[start].ts_us >= window_us)
        else {
            break;
        };
        let mut dispersion = window_dispersion(&samples[start..=end]);
        if dispersion > thr {
            start += 1;
            continue;
        }
        let mut end = end;
        while end + 1 < n {
            let next = samples[end + 1].ray.direction();
            let grown = samples[start..=end]
                .iter()
                .map(|s| angular_distance(s.ray.direction(), next))
                .fold(dispersion, f64::max);
            if grown > thr {
                break;
            }
            dispersion = grown;
            end += 1;
        }
        out.push(make_event(&samples[start..=end], dispersion));
        start = end + 1;
    }
    out
}

/// Most recent fixation in the track, if any.
pub fn detect_fixation(
    track: &GazeTrack,
    window_ms: u64,
    dispersion_threshold_deg: f64,
) -> Option<FixationEvent> {
    let samples: Vec<GazeSample> = track.samples().copied().collect();
    fixations(
        &samples,
        FixationParams {
            window_ms,
            dispersion_threshold_deg,
        },
    )
    .pop()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::push_sample;
    use crate::geometry::Ray;

    fn track_from(dirs: impl IntoIterator<Item = (i64, Vec3)>) -> GazeTrack {
        let mut t = GazeTrack::default();
        for (ts, d) in dirs {
            push_sample(
                &mut t,
                GazeSample::new(ts, Ray::new(Vec3::ZERO, d).unwrap()),
            );
        }
        t
    }

    #[test]
    fn steady_gaze_is_a_fixation() {
        let t = track_from((0..=20).map(|i| (i * 10_000, Vec3::new(0.2, 0.1, 1.0))));
        let f = detect_fixation(&t, 150, 1.5).unwrap();
        assert_eq!(f.dispersion_deg, 0.0);
        assert_eq!((f.start_us, f.end_us), (0, 200_000));
    }

    #[test]
    fn sweeping_gaze_is_not() {
        // 5 degrees over 200 ms.
        let t = track_from((0..=20).map(|i| {
            let a = (i as f64 * 0.25).to_radians();
            (i * 10_000, Vec3::new(a.sin(), 0.0, a.cos()))
        }));
        assert!(detect_fixation(&t, 150, 1.5).is_none());
    }

    #[test]
    fn too_short_is_not() {
        let t = track_from((0..10).map(|i| (i * 10_000, Vec3::Z)));
        assert!(detect_fixation(&t, 150, 1.5).is_none());
    }
}
