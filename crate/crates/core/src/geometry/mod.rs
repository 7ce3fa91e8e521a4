//! 3-D primitives shared by the rest of the crate.
//!
//! Right-handed world frame, +Y up, meters. Every function here is pure.

mod align;
mod frustum;

pub use align::{align_frames, rms_residual, RigidTransform};
pub use frustum::{clamp_to_frustum, frustum_contains, Frustum, CLAMP_INSET_DEG};

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for "unit length" checks on direction vectors.
pub const UNIT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
    #[error("direction vector has zero length")]
    ZeroDirection,
    #[error("box half extents must be positive, got {0:?}")]
    NonPositiveExtent([f64; 3]),
    #[error("ray parameter must be finite and >= 0, got {0}")]
    InvalidParameter(f64),
    #[error("invalid frustum: {0}")]
    InvalidFrustum(&'static str),
    #[error("point coincides with the frustum apex")]
    PointAtApex,
    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn finite(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let v = Vec3::new(x, y, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GeometryError::NonFinite("vector"))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Result<Vec3, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::NonFinite("direction"));
        }
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(self / n)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_EPS
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    /// Rotates `self` about the unit `axis` by `angle_rad` (Rodrigues).
    pub fn rotated_about(self, axis: Vec3, angle_rad: f64) -> Vec3 {
        let (s, c) = angle_rad.sin_cos();
        self * c + axis.cross(self) * s + axis * (axis.dot(self) * (1.0 - c))
    }

    /// Any unit vector perpendicular to `self` (which must be non-zero).
    pub fn any_perpendicular(self) -> Vec3 {
        let helper = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Vec3::X
        } else if self.y.abs() <= self.z.abs() {
            Vec3::Y
        } else {
            Vec3::Z
        };
        let p = self.cross(helper);
        p / p.norm()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Half-line `origin + t * direction`, `t >= 0`, with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        if !origin.is_finite() {
            return Err(GeometryError::NonFinite("ray origin"));
        }
        Ok(Ray {
            origin,
            direction: direction.normalized()?,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }
}

/// Axis-aligned box stored as center and half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    center: Vec3,
    half_extents: Vec3,
}

impl Aabb {
    pub fn new(center: Vec3, half_extents: Vec3) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::NonFinite("box center"));
        }
        let h = half_extents;
        if !h.is_finite() || h.x <= 0.0 || h.y <= 0.0 || h.z <= 0.0 {
            return Err(GeometryError::NonPositiveExtent(h.to_array()));
        }
        Ok(Aabb {
            center,
            half_extents,
        })
    }

    pub fn cube(center: Vec3, half: f64) -> Result<Self, GeometryError> {
        Aabb::new(center, Vec3::new(half, half, half))
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn half_extents(&self) -> Vec3 {
        self.half_extents
    }

    pub fn min(&self) -> Vec3 {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Vec3 {
        self.center + self.half_extents
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|i| p.component(i) >= lo.component(i) && p.component(i) <= hi.component(i))
    }
}

/// `origin + t * direction`.
pub fn point_at(ray: &Ray, t: f64) -> Result<Vec3, GeometryError> {
    if !t.is_finite() || t < 0.0 {
        return Err(GeometryError::InvalidParameter(t));
    }
    Ok(ray.origin + ray.direction * t)
}

/// Slab test. Returns the smallest `t >= 0` at which the ray is on or in the
/// box; a ray that starts inside reports `t = 0`.
pub fn ray_aabb_intersect(ray: &Ray, aabb: &Aabb) -> Option<f64> {
    let (lo, hi) = (aabb.min(), aabb.max());
    let mut t_near = 0.0_f64;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let o = ray.origin.component(axis);
        let d = ray.direction.component(axis);
        let (l, h) = (lo.component(axis), hi.component(axis));
        if d == 0.0 {
            // Parallel to this slab: either always inside it or never.
            if o < l || o > h {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let t0 = (l - o) * inv;
        let t1 = (h - o) * inv;
        t_near = t_near.max(t0.min(t1));
        t_far = t_far.min(t0.max(t1));
        if t_near > t_far {
            return None;
        }
    }
    Some(t_near)
}

/// Angle between two directions in degrees, in `[0, 180]`.
pub fn angular_distance(a: Vec3, b: Vec3) -> f64 {
    // atan2 stays accurate near 0° and 180°, where acos of the dot loses
    // half the significant digits.
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Rotates unit `from` toward unit `to` by at most `max_deg` degrees along
/// the great circle. Returns `to` when it is already within reach.
pub fn rotate_toward(from: Vec3, to: Vec3, max_deg: f64) -> Vec3 {
    let total = angular_distance(from, to);
    if total <= max_deg || total == 0.0 {
        return to;
    }
    let axis = from.cross(to);
    let axis_norm = axis.norm();
    let axis = if axis_norm < 1e-12 {
        from.any_perpendicular()
    } else {
        axis / axis_norm
    };
    let r = from.rotated_about(axis, max_deg.to_radians());
    r / r.norm()
}
