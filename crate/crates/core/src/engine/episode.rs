use serde::{Deserialize, Serialize};

use super::Mode;
use crate::geometry::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerKind {
    Guide,
    Pulse,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerState {
    Visible,
    Confirmed,
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub id: u64,
    pub aabb: Aabb,
    pub kind: MarkerKind,
    pub placed_us: i64,
    pub state: MarkerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeKind {
    Attraction,
    Shift,
}

/// One displayed cue position within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub marker_id: u64,
    /// Last (re)placement time; recovery re-placements move it forward.
    pub placed_us: i64,
    pub confirmed_us: Option<i64>,
    /// `confirmed_us - placed_us`.
    pub t_i_us: Option<i64>,
    pub ended_us: Option<i64>,
    /// Recovery re-placements during this step.
    pub timeouts: u32,
}

impl StepRecord {
    pub fn duration_us(&self) -> i64 {
        self.ended_us.map(|e| e - self.placed_us).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub poi_id: String,
    pub mode: Mode,
    pub kind: EpisodeKind,
    pub steps: Vec<StepRecord>,
    /// Total timeouts, including the one that failed the episode.
    pub timeouts: u32,
    /// Time spent on markers that were later re-placed by recovery.
    pub recovery_us: i64,
    pub total_us: i64,
    pub start_us: i64,
    pub end_us: Option<i64>,
    pub success: bool,
    /// Waypoint count of the attraction plan.
    pub plan_len: usize,
    /// Distance from the plan anchor to the POI.
    pub anchor_distance_m: f64,
}

impl EpisodeRecord {
    pub(crate) fn new(poi_id: &str, mode: Mode, kind: EpisodeKind, start_us: i64) -> Self {
        EpisodeRecord {
            poi_id: poi_id.to_string(),
            mode,
            kind,
            steps: Vec::new(),
            timeouts: 0,
            recovery_us: 0,
            total_us: 0,
            start_us,
            end_us: None,
            success: false,
            plan_len: 0,
            anchor_distance_m: 0.0,
        }
    }

    /// Sum of step durations plus recovery intervals.
    pub fn accounted_us(&self) -> i64 {
        self.steps.iter().map(StepRecord::duration_us).sum::<i64>() + self.recovery_us
    }

    pub fn confirmations(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.confirmed_us.is_some())
            .count()
    }
}
