use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    angular_distance, clamp_to_frustum, frustum_contains, point_at, rotate_toward, Frustum,
    GeometryError, Ray, Vec3,
};

/// Relative slack when rounding `distance / spacing` up to a waypoint count,
/// so that floating-point noise on an exact multiple does not add a step.
pub const COUNT_SLACK: f64 = 1e-9;

/// Below this anchor-to-POI distance the plan collapses to the POI itself.
pub const DEGENERATE_DISTANCE_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub position: Vec3,
    #[serde(default)]
    pub label: String,
}

impl Poi {
    pub fn new(id: impl Into<String>, position: Vec3, label: impl Into<String>) -> Self {
        Poi {
            id: id.into(),
            position,
            label: label.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("marker spacing must be finite and > 0, got {0}")]
    InvalidSpacing(f64),
    #[error("POI coincides with the gaze origin")]
    PoiAtEye,
    #[error("POI is already at the gaze anchor ({distance_m:e} m away)")]
    DegeneratePlan { anchor: Vec3, distance_m: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Waypoint chain from the gaze anchor to a POI.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionPlan {
    pub poi_id: String,
    pub anchor: Vec3,
    pub waypoints: Vec<Vec3>,
    pub delta_d_m: f64,
    pub cursor: usize,
}

impl AttractionPlan {
    /// One-marker plan sitting on the POI.
    pub fn single(poi: &Poi, delta_d_m: f64) -> Self {
        AttractionPlan {
            poi_id: poi.id.clone(),
            anchor: poi.position,
            waypoints: vec![poi.position],
            delta_d_m,
            cursor: 0,
        }
    }

    pub fn current(&self) -> Vec3 {
        self.waypoints[self.cursor]
    }

    pub fn is_last(&self) -> bool {
        self.cursor + 1 >= self.waypoints.len()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn anchor_distance(&self) -> f64 {
        self.waypoints
            .last()
            .map(|p| (*p - self.anchor).norm())
            .unwrap_or(0.0)
    }
}

/// `⌈distance / spacing⌉`, at least 1.
pub fn waypoint_count(distance_m: f64, delta_d_m: f64) -> usize {
    ((distance_m / delta_d_m) - COUNT_SLACK).ceil().max(1.0) as usize
}

fn chain(anchor: Vec3, poi: Vec3, delta_d_m: f64) -> Vec<Vec3> {
    let span = poi - anchor;
    let dist = span.norm();
    let dir = span / dist;
    let n = waypoint_count(dist, delta_d_m);
    let mut pts: Vec<Vec3> = (1..n)
        .map(|k| anchor + dir * (k as f64 * delta_d_m))
        .collect();
    pts.push(poi);
    pts
}

/// Plans the marker chain toward `poi`.
///
/// The anchor is the gaze point at the POI's range, clamped into the view
/// frustum. Waypoints sit every `delta_d_m` from the anchor toward the POI;
/// the last one is the POI itself. If the first waypoint would fall outside
/// the frustum, the anchor is slid toward the view axis (same range) until it
/// does not.
pub fn plan_chain(
    gaze: &Ray,
    frustum: &Frustum,
    poi: &Poi,
    delta_d_m: f64,
) -> Result<AttractionPlan, PlanError> {
    if !delta_d_m.is_finite() || delta_d_m <= 0.0 {
        return Err(PlanError::InvalidSpacing(delta_d_m));
    }
    if !poi.position.is_finite() {
        return Err(GeometryError::NonFinite("POI position").into());
    }
    let range = (poi.position - gaze.origin()).norm();
    if range < DEGENERATE_DISTANCE_M {
        return Err(PlanError::PoiAtEye);
    }
    let clamped = clamp_to_frustum(frustum, point_at(gaze, range)?)?;
    let anchor = slide_anchor(frustum, clamped, poi.position, delta_d_m);
    let distance_m = (poi.position - anchor).norm();
    if distance_m < DEGENERATE_DISTANCE_M {
        return Err(PlanError::DegeneratePlan { anchor, distance_m });
    }
    Ok(AttractionPlan {
        poi_id: poi.id.clone(),
        anchor,
        waypoints: chain(anchor, poi.position, delta_d_m),
        delta_d_m,
        cursor: 0,
    })
}

const SLIDE_STEPS: usize = 16;

fn first_waypoint(anchor: Vec3, poi: Vec3, delta_d_m: f64) -> Option<Vec3> {
    let span = poi - anchor;
    let dist = span.norm();
    if dist < DEGENERATE_DISTANCE_M {
        return None;
    }
    Some(if waypoint_count(dist, delta_d_m) == 1 {
        poi
    } else {
        anchor + span / dist * delta_d_m
    })
}

fn slide_anchor(frustum: &Frustum, anchor: Vec3, poi: Vec3, delta_d_m: f64) -> Vec3 {
    let visible = |a: Vec3| match first_waypoint(a, poi, delta_d_m) {
        Some(w) => frustum_contains(frustum, w),
        None => true,
    };
    if visible(anchor) {
        return anchor;
    }
    let offset = anchor - frustum.apex();
    let range = offset.norm();
    let dir = offset / range;
    let total = angular_distance(dir, frustum.forward());
    for i in 1..=SLIDE_STEPS {
        let step = total * i as f64 / SLIDE_STEPS as f64;
        let candidate = frustum.apex() + rotate_toward(dir, frustum.forward(), step) * range;
        if visible(candidate) {
            return candidate;
        }
    }
    // Nothing better exists at this range; keep the clamped anchor.
    anchor
}
