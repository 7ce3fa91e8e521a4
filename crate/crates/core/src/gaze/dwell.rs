use serde::{Deserialize, Serialize};

use super::GazeSample;
use crate::geometry::{ray_aabb_intersect, Aabb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellParams {
    pub dwell_ms: u64,
    pub gap_tolerance_ms: u64,
}

impl Default for DwellParams {
    fn default() -> Self {
        DwellParams {
            dwell_ms: 250,
            gap_tolerance_ms: 50,
        }
    }
}

/// Accumulated on-target gaze time for one marker.
///
/// A dwell run starts at the first hitting sample. Each further hit adds the
/// time since the previous hit; misses are tolerated while they stay within
/// the gap tolerance of the last hit, and a longer gap (observed as a miss or
/// as a late hit) discards the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DwellState {
    pub marker_id: Option<u64>,
    pub accumulated_us: i64,
    pub gap_us: i64,
    pub confirmed: bool,
    pub confirmed_at_us: Option<i64>,
    last_hit_us: Option<i64>,
}

impl DwellState {
    pub fn for_marker(marker_id: u64) -> Self {
        DwellState {
            marker_id: Some(marker_id),
            ..Default::default()
        }
    }

    pub fn last_hit_us(&self) -> Option<i64> {
        self.last_hit_us
    }

    /// Applies one hit/miss observation at `ts_us`.
    pub fn observe(mut self, ts_us: i64, hit: bool, params: DwellParams) -> Self {
        if self.confirmed {
            return self;
        }
        let tolerance = params.gap_tolerance_ms as i64 * 1000;
        if hit {
            match self.last_hit_us {
                // A dropout longer than the tolerance ends the run even
                // when no miss sample was seen in between.
                Some(last) if ts_us - last > tolerance => self.accumulated_us = 0,
                Some(last) => self.accumulated_us += ts_us - last,
                None => {}
            }
            self.last_hit_us = Some(ts_us);
            self.gap_us = 0;
            if self.accumulated_us >= params.dwell_ms as i64 * 1000 {
                self.confirmed = true;
                self.confirmed_at_us = Some(ts_us);
            }
        } else if let Some(last) = self.last_hit_us {
            self.gap_us = ts_us - last;
            if self.gap_us > tolerance {
                self.accumulated_us = 0;
                self.last_hit_us = None;
            }
        }
        self
    }
}

/// Raycasts `s` against the marker box and folds the result into `state`.
pub fn update_dwell(
    state: DwellState,
    s: &GazeSample,
    marker_box: &Aabb,
    dwell_ms: u64,
    gap_tolerance_ms: u64,
) -> DwellState {
    let hit = ray_aabb_intersect(&s.ray, marker_box).is_some();
    state.observe(
        s.ts_us,
        hit,
        DwellParams {
            dwell_ms,
            gap_tolerance_ms,
        },
    )
}
