//! The attention state machine.
//!
//! The engine consumes an ordered stream of events, each stamped with the
//! caller's clock (`now_us`), and answers with protocol payloads to emit.
//! It never reads the wall clock.

mod config;
mod episode;
mod interval;
mod plan;

pub use config::{EngineConfig, Mode};
pub use episode::{EpisodeKind, EpisodeRecord, Marker, MarkerKind, MarkerState, StepRecord};
pub use interval::{
    adapt_interval, feedback_from_config, EwmaInterval, FixedInterval, IntervalFeedback,
    IntervalPolicy,
};
pub use plan::{
    plan_chain, waypoint_count, AttractionPlan, PlanError, Poi, COUNT_SLACK, DEGENERATE_DISTANCE_M,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::ConfigError;
use crate::gaze::{
    detect_fixation, estimate_kinematics_with, push_sample, update_dwell, DwellState,
    GazeKinematics, GazeSample, GazeTrack, KinematicsOptions,
};
use crate::geometry::{
    align_frames, angular_distance, rotate_toward, Aabb, Frustum, GeometryError, RigidTransform,
    Vec3,
};
use crate::protocol::Body;

/// Connection identifier assigned by the session layer.
pub type ConnId = u64;

/// A payload produced by the engine. `to` is set only for replies addressed
/// to one connection (errors).
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub to: Option<ConnId>,
    pub body: Body,
}

impl Emission {
    fn broadcast(body: Body) -> Self {
        Emission { to: None, body }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineEvent {
    Gaze(GazeSample),
    Tick,
    StartAttraction {
        poi_id: String,
        mode: Option<Mode>,
    },
    StartShift {
        poi_id: String,
        mode: Option<Mode>,
    },
    PoiDetected {
        poi_id: String,
        pos_robot: Vec3,
        label: String,
    },
    Align {
        pairs: Vec<(Vec3, Vec3)>,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("an episode is already running")]
    Busy,
    #[error("unknown POI {0:?}")]
    UnknownPoi(String),
    #[error("no gaze sample received yet")]
    NoGaze,
    #[error("no recent fixation to shift away from")]
    NoFixation,
    #[error("cannot plan marker chain: {0}")]
    Plan(#[from] PlanError),
    #[error("alignment failed: {0}")]
    Alignment(GeometryError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Busy => "busy",
            EngineError::UnknownPoi(_) => "unknown-poi",
            EngineError::NoGaze => "no-gaze",
            EngineError::NoFixation => "no-fixation",
            EngineError::Plan(_) => "plan-failed",
            EngineError::Alignment(_) => "degenerate-correspondences",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    AwaitingGaze,
    /// Transient while a marker is being moved; never observable between events.
    Advancing,
    Reached,
    TimedOut,
}

impl Phase {
    /// Phases from which a new episode may start.
    pub fn accepts_start(self) -> bool {
        matches!(self, Phase::Idle | Phase::Reached | Phase::TimedOut)
    }
}

/// Pending attraction that follows a shift cue.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftCue {
    pub poi: Poi,
    pub pulse_dir: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub mode: Mode,
    pub phase: Phase,
    pub active_plan: Option<AttractionPlan>,
    pub active_marker: Option<Marker>,
    pub dwell: DwellState,
    pub record: Option<EpisodeRecord>,
    pub shift: Option<ShiftCue>,
    pub step_confirmed: bool,
    pub consecutive_timeouts: u32,
}

impl EngineState {
    fn idle(mode: Mode) -> Self {
        EngineState {
            mode,
            phase: Phase::Idle,
            active_plan: None,
            active_marker: None,
            dwell: DwellState::default(),
            record: None,
            shift: None,
            step_confirmed: false,
            consecutive_timeouts: 0,
        }
    }
}

pub struct Engine {
    cfg: EngineConfig,
    state: EngineState,
    track: GazeTrack,
    pois: BTreeMap<String, Poi>,
    robot_to_world: RigidTransform,
    interval: Box<dyn IntervalFeedback>,
    next_marker_id: u64,
    now_us: i64,
    kinematics: Option<GazeKinematics>,
    finished: Vec<EpisodeRecord>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("state", &self.state)
            .field("now_us", &self.now_us)
            .field("delta_t_ms", &self.interval.current_ms())
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut track = GazeTrack::new(cfg.track_capacity);
        track
            .set_reference_depth(cfg.default_reference_depth_m)
            .map_err(|e| ConfigError::invalid("engine.default_reference_depth_m", e.to_string()))?;
        Ok(Engine {
            interval: feedback_from_config(&cfg),
            state: EngineState::idle(cfg.mode),
            cfg,
            track,
            pois: BTreeMap::new(),
            robot_to_world: RigidTransform::identity(),
            next_marker_id: 1,
            now_us: 0,
            kinematics: None,
            finished: Vec::new(),
        })
    }

    /// Replaces the interval feedback function.
    pub fn set_interval_feedback(&mut self, f: Box<dyn IntervalFeedback>) {
        self.interval = f;
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn track(&self) -> &GazeTrack {
        &self.track
    }

    pub fn now_us(&self) -> i64 {
        self.now_us
    }

    pub fn current_delta_t_ms(&self) -> u64 {
        self.interval.current_ms()
    }

    pub fn kinematics(&self) -> Option<GazeKinematics> {
        self.kinematics
    }

    pub fn robot_to_world(&self) -> RigidTransform {
        self.robot_to_world
    }

    pub fn pois(&self) -> impl Iterator<Item = &Poi> {
        self.pois.values()
    }

    /// Registers a POI given in world coordinates.
    pub fn add_poi(&mut self, poi: Poi) {
        self.pois.insert(poi.id.clone(), poi);
    }

    pub fn finished_episodes(&self) -> &[EpisodeRecord] {
        &self.finished
    }

    pub fn last_record(&self) -> Option<&EpisodeRecord> {
        self.finished.last()
    }

    /// Dispatches one event. Command failures become `ERROR` replies to `from`.
    pub fn handle(
        &mut self,
        now_us: i64,
        event: EngineEvent,
        from: Option<ConnId>,
    ) -> Vec<Emission> {
        self.now_us = self.now_us.max(now_us);
        let result = match event {
            EngineEvent::Gaze(sample) => Ok(self.on_gaze(sample)),
            EngineEvent::Tick => Ok(self.on_tick(now_us)),
            EngineEvent::StartAttraction { poi_id, mode } => {
                self.start_attraction(&poi_id, mode.unwrap_or(self.cfg.mode))
            }
            EngineEvent::StartShift { poi_id, mode } => {
                self.start_shift(&poi_id, mode.unwrap_or(self.cfg.mode))
            }
            EngineEvent::PoiDetected {
                poi_id,
                pos_robot,
                label,
            } => {
                let position = self.robot_to_world.apply(pos_robot);
                self.add_poi(Poi::new(poi_id, position, label));
                Ok(Vec::new())
            }
            EngineEvent::Align { pairs } => match align_frames(&pairs) {
                Ok(t) => {
                    self.robot_to_world = t;
                    Ok(Vec::new())
                }
                Err(e) => Err(EngineError::Alignment(e)),
            },
        };
        result.unwrap_or_else(|e| {
            vec![Emission {
                to: from,
                body: Body::error(e.code(), e.to_string()),
            }]
        })
    }

    /// Feeds one gaze sample. Out-of-order samples are dropped.
    pub fn on_gaze(&mut self, sample: GazeSample) -> Vec<Emission> {
        if !push_sample(&mut self.track, sample) {
            return Vec::new();
        }
        self.now_us = self.now_us.max(sample.ts_us);
        let depth = match &self.state.active_marker {
            Some(m) => (m.aabb.center() - sample.ray.origin()).norm(),
            None => self.cfg.default_reference_depth_m,
        };
        if depth > 0.0 {
            let _ = self.track.set_reference_depth(depth);
        }
        let opts = KinematicsOptions {
            smoothing: self.cfg.smoothing,
        };
        if let Ok(k) = estimate_kinematics_with(&self.track, opts) {
            self.kinematics = Some(k);
        }

        if self.state.phase != Phase::AwaitingGaze || self.state.step_confirmed {
            return Vec::new();
        }
        let Some(marker) = self.state.active_marker else {
            return Vec::new();
        };
        if sample.ts_us < marker.placed_us {
            return Vec::new();
        }
        self.state.dwell = update_dwell(
            self.state.dwell,
            &sample,
            &marker.aabb,
            self.cfg.dwell_ms,
            self.cfg.gap_tolerance_ms,
        );
        match self.state.dwell.confirmed_at_us {
            Some(at) if self.state.dwell.confirmed => self.confirm(at),
            _ => Vec::new(),
        }
    }

    /// Advances time: scheduled marker moves and timeout recovery.
    pub fn on_tick(&mut self, now_us: i64) -> Vec<Emission> {
        self.now_us = self.now_us.max(now_us);
        if self.state.phase != Phase::AwaitingGaze {
            return Vec::new();
        }
        let Some(marker) = self.state.active_marker else {
            return Vec::new();
        };
        let elapsed = now_us - marker.placed_us;
        let scheduled_hop = self.state.mode == Mode::Scheduled
            && self.state.shift.is_none()
            && self
                .state
                .active_plan
                .as_ref()
                .is_some_and(|p| !p.is_last());
        if scheduled_hop && elapsed >= self.interval.current_ms() as i64 * 1000 {
            return self.advance(now_us);
        }
        if !self.state.step_confirmed && elapsed >= self.cfg.timeout_ms as i64 * 1000 {
            return self.time_out(now_us);
        }
        Vec::new()
    }

    pub fn start_attraction(
        &mut self,
        poi_id: &str,
        mode: Mode,
    ) -> Result<Vec<Emission>, EngineError> {
        if !self.state.phase.accepts_start() {
            return Err(EngineError::Busy);
        }
        let poi = self
            .pois
            .get(poi_id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownPoi(poi_id.to_string()))?;
        let plan = self.plan_for(&poi)?;
        let now = self.now_us;
        self.state = EngineState::idle(mode);
        self.state.record = Some(EpisodeRecord::new(
            &poi.id,
            mode,
            EpisodeKind::Attraction,
            now,
        ));
        Ok(self.begin_plan(plan, now))
    }

    pub fn start_shift(&mut self, poi_id: &str, mode: Mode) -> Result<Vec<Emission>, EngineError> {
        if !self.state.phase.accepts_start() {
            return Err(EngineError::Busy);
        }
        let poi = self
            .pois
            .get(poi_id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownPoi(poi_id.to_string()))?;
        let latest = *self.track.latest().ok_or(EngineError::NoGaze)?;
        let fixation = detect_fixation(
            &self.track,
            self.cfg.fixation_window_ms,
            self.cfg.dispersion_threshold_deg,
        )
        .filter(|f| latest.ts_us - f.end_us <= self.cfg.fixation_recency_ms as i64 * 1000)
        .ok_or(EngineError::NoFixation)?;

        let pulse_dir = shift_direction(
            fixation.centroid_dir,
            poi.position - fixation.origin,
            self.cfg.eccentricity_deg,
        );
        let center = fixation.origin + pulse_dir * self.cfg.default_reference_depth_m;
        let now = self.now_us;
        self.state = EngineState::idle(mode);
        self.state.record = Some(EpisodeRecord::new(&poi.id, mode, EpisodeKind::Shift, now));
        self.state.shift = Some(ShiftCue { poi, pulse_dir });
        Ok(vec![self.place_marker(center, MarkerKind::Pulse, now)])
    }

    fn plan_for(&self, poi: &Poi) -> Result<AttractionPlan, EngineError> {
        let latest = self.track.latest().ok_or(EngineError::NoGaze)?;
        let gaze = latest.ray;
        let frustum = Frustum::looking_along(
            gaze.origin(),
            gaze.direction(),
            self.cfg.hfov_deg,
            self.cfg.vfov_deg,
        )
        .map_err(PlanError::from)?;
        match plan_chain(&gaze, &frustum, poi, self.cfg.delta_d_m) {
            Ok(plan) => Ok(plan),
            Err(PlanError::DegeneratePlan { .. }) => {
                Ok(AttractionPlan::single(poi, self.cfg.delta_d_m))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn marker_box(&self, center: Vec3) -> Aabb {
        let h = self.cfg.marker_half_extent_m;
        // Half extent is validated positive and centers are finite.
        Aabb::cube(center, h).expect("validated marker size")
    }

    fn place_marker(&mut self, center: Vec3, kind: MarkerKind, now: i64) -> Emission {
        let id = self.next_marker_id;
        self.next_marker_id += 1;
        let marker = Marker {
            id,
            aabb: self.marker_box(center),
            kind,
            placed_us: now,
            state: MarkerState::Visible,
        };
        self.state.active_marker = Some(marker);
        self.state.dwell = DwellState::for_marker(id);
        self.state.step_confirmed = false;
        self.state.phase = Phase::AwaitingGaze;
        if let Some(rec) = self.state.record.as_mut() {
            rec.steps.push(StepRecord {
                marker_id: id,
                placed_us: now,
                confirmed_us: None,
                t_i_us: None,
                ended_us: None,
                timeouts: 0,
            });
        }
        Emission::broadcast(Body::MarkerPlace {
            marker_id: id,
            pos: center.into(),
            half: marker.aabb.half_extents().into(),
            kind,
        })
    }

    fn begin_plan(&mut self, plan: AttractionPlan, now: i64) -> Vec<Emission> {
        let kind = if plan.len() == 1 {
            MarkerKind::Final
        } else {
            MarkerKind::Guide
        };
        let first = plan.current();
        if let Some(rec) = self.state.record.as_mut() {
            rec.plan_len = plan.len();
            rec.anchor_distance_m = plan.anchor_distance();
        }
        self.state.active_plan = Some(plan);
        vec![self.place_marker(first, kind, now)]
    }

    fn end_step(&mut self, at: i64) {
        if let Some(step) = self.state.record.as_mut().and_then(|r| r.steps.last_mut()) {
            step.ended_us = Some(at);
        }
    }

    fn remove_marker(&mut self) -> Option<Emission> {
        let mut marker = self.state.active_marker.take()?;
        marker.state = MarkerState::Removed;
        Some(Emission::broadcast(Body::MarkerRemove {
            marker_id: marker.id,
        }))
    }

    fn confirm(&mut self, at: i64) -> Vec<Emission> {
        let Some(marker) = self.state.active_marker.as_mut() else {
            return Vec::new();
        };
        marker.state = MarkerState::Confirmed;
        let marker_id = marker.id;
        let t_i = at - marker.placed_us;
        if let Some(step) = self.state.record.as_mut().and_then(|r| r.steps.last_mut()) {
            step.confirmed_us = Some(at);
            step.t_i_us = Some(t_i);
        }
        self.state.step_confirmed = true;
        self.state.consecutive_timeouts = 0;
        self.interval.observe(t_i);
        let mut out = vec![Emission::broadcast(Body::GazeConfirmed {
            marker_id,
            t_i_us: t_i,
        })];

        if let Some(cue) = self.state.shift.take() {
            self.end_step(at);
            out.extend(self.remove_marker());
            self.state.phase = Phase::Advancing;
            match self.plan_for(&cue.poi) {
                Ok(plan) => out.extend(self.begin_plan(plan, at)),
                Err(_) => out.extend(self.finish(false, at)),
            }
            return out;
        }
        let last = self.state.active_plan.as_ref().is_none_or(|p| p.is_last());
        if last {
            self.end_step(at);
            out.extend(self.remove_marker());
            out.extend(self.finish(true, at));
        } else if self.state.mode == Mode::ConfirmationGated {
            out.extend(self.advance(at));
        }
        out
    }

    fn advance(&mut self, at: i64) -> Vec<Emission> {
        self.state.phase = Phase::Advancing;
        self.end_step(at);
        let Some(plan) = self.state.active_plan.as_mut() else {
            return Vec::new();
        };
        plan.cursor += 1;
        let next = plan.current();
        let aabb = self.marker_box(next);
        let Some(marker) = self.state.active_marker.as_mut() else {
            return Vec::new();
        };
        marker.aabb = aabb;
        marker.placed_us = at;
        marker.state = MarkerState::Visible;
        let marker_id = marker.id;
        self.state.dwell = DwellState::for_marker(marker_id);
        self.state.step_confirmed = false;
        self.state.phase = Phase::AwaitingGaze;
        if let Some(rec) = self.state.record.as_mut() {
            rec.steps.push(StepRecord {
                marker_id,
                placed_us: at,
                confirmed_us: None,
                t_i_us: None,
                ended_us: None,
                timeouts: 0,
            });
        }
        vec![Emission::broadcast(Body::MarkerMove {
            marker_id,
            pos: next.into(),
        })]
    }

    fn time_out(&mut self, now: i64) -> Vec<Emission> {
        self.state.consecutive_timeouts += 1;
        if let Some(rec) = self.state.record.as_mut() {
            rec.timeouts += 1;
            if let Some(step) = rec.steps.last_mut() {
                step.timeouts += 1;
            }
        }
        if self.state.consecutive_timeouts >= self.cfg.max_timeouts {
            self.end_step(now);
            let mut out: Vec<Emission> = self.remove_marker().into_iter().collect();
            out.extend(self.finish(false, now));
            return out;
        }

        let Some(marker) = self.state.active_marker else {
            return Vec::new();
        };
        let center = self.recovery_position(marker.aabb.center());
        let aabb = self.marker_box(center);
        if let Some(rec) = self.state.record.as_mut() {
            rec.recovery_us += now - marker.placed_us;
            if let Some(step) = rec.steps.last_mut() {
                step.placed_us = now;
            }
        }
        let m = self.state.active_marker.as_mut().expect("checked above");
        m.aabb = aabb;
        m.kind = MarkerKind::Pulse;
        m.placed_us = now;
        m.state = MarkerState::Visible;
        self.state.dwell = DwellState::for_marker(m.id);
        vec![Emission::broadcast(Body::MarkerPlace {
            marker_id: m.id,
            pos: center.into(),
            half: aabb.half_extents().into(),
            kind: MarkerKind::Pulse,
        })]
    }

    /// Halfway (by angle) from the marker toward the current gaze direction,
    /// at the marker's range from the eye.
    fn recovery_position(&self, center: Vec3) -> Vec3 {
        let Some(latest) = self.track.latest() else {
            return center;
        };
        let origin = latest.ray.origin();
        let offset = center - origin;
        let range = offset.norm();
        if range == 0.0 {
            return center;
        }
        let marker_dir = offset / range;
        let half = angular_distance(latest.ray.direction(), marker_dir) / 2.0;
        origin + rotate_toward(marker_dir, latest.ray.direction(), half) * range
    }

    fn finish(&mut self, success: bool, at: i64) -> Vec<Emission> {
        self.state.phase = if success {
            Phase::Reached
        } else {
            Phase::TimedOut
        };
        self.state.active_marker = None;
        self.state.shift = None;
        let Some(mut rec) = self.state.record.take() else {
            return Vec::new();
        };
        rec.end_us = Some(at);
        rec.success = success;
        rec.total_us = rec.accounted_us();
        let body = Body::EpisodeDone {
            poi_id: rec.poi_id.clone(),
            total_us: rec.total_us,
            steps: rec.steps.len() as u32,
            timeouts: rec.timeouts,
            success,
        };
        self.finished.push(rec);
        vec![Emission::broadcast(body)]
    }
}

/// Direction `eccentricity_deg` away from the fixation centroid, turned
/// toward `to_poi`. A POI straight along the centroid picks an arbitrary
/// perpendicular turn.
pub fn shift_direction(centroid: Vec3, to_poi: Vec3, eccentricity_deg: f64) -> Vec3 {
    let axis = centroid.cross(to_poi);
    let axis = if axis.norm() < 1e-9 {
        centroid.any_perpendicular()
    } else {
        axis / axis.norm()
    };
    let d = centroid.rotated_about(axis, eccentricity_deg.to_radians());
    d / d.norm()
}
