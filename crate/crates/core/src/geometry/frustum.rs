use super::{GeometryError, Vec3};

/// Angular inset applied when pulling an out-of-view point onto the frustum
/// boundary, degrees.
pub const CLAMP_INSET_DEG: f64 = 2.0;

/// Rectangular viewing frustum without near/far planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frustum {
    apex: Vec3,
    forward: Vec3,
    up: Vec3,
    hfov_deg: f64,
    vfov_deg: f64,
}

impl Frustum {
    /// `forward` and `up` are normalized; they must be perpendicular within 1e-6.
    pub fn new(
        apex: Vec3,
        forward: Vec3,
        up: Vec3,
        hfov_deg: f64,
        vfov_deg: f64,
    ) -> Result<Self, GeometryError> {
        if !apex.is_finite() {
            return Err(GeometryError::NonFinite("frustum apex"));
        }
        let forward = forward.normalized()?;
        let up = up.normalized()?;
        if forward.dot(up).abs() > 1e-6 {
            return Err(GeometryError::InvalidFrustum(
                "forward and up are not perpendicular",
            ));
        }
        let fov_ok = |f: f64| f.is_finite() && f > 0.0 && f < 180.0;
        if !fov_ok(hfov_deg) || !fov_ok(vfov_deg) {
            return Err(GeometryError::InvalidFrustum(
                "fields of view must lie in (0, 180)",
            ));
        }
        Ok(Frustum {
            apex,
            forward,
            up,
            hfov_deg,
            vfov_deg,
        })
    }

    /// Frustum looking along `forward` with +Y as the reference up vector.
    /// Falls back to +Z as reference when `forward` is (nearly) vertical.
    pub fn looking_along(
        apex: Vec3,
        forward: Vec3,
        hfov_deg: f64,
        vfov_deg: f64,
    ) -> Result<Self, GeometryError> {
        let forward = forward.normalized()?;
        let reference = if forward.cross(Vec3::Y).norm() < 1e-6 {
            Vec3::Z
        } else {
            Vec3::Y
        };
        let up = (reference - forward * reference.dot(forward)).normalized()?;
        Frustum::new(apex, forward, up, hfov_deg, vfov_deg)
    }

    pub fn apex(&self) -> Vec3 {
        self.apex
    }
    pub fn forward(&self) -> Vec3 {
        self.forward
    }
    pub fn up(&self) -> Vec3 {
        self.up
    }
    pub fn hfov_deg(&self) -> f64 {
        self.hfov_deg
    }
    pub fn vfov_deg(&self) -> f64 {
        self.vfov_deg
    }

    pub fn right(&self) -> Vec3 {
        self.up.cross(self.forward)
    }

    /// Horizontal and vertical view angles of `v` (relative to the apex),
    /// each `atan2(lateral, depth)` in degrees.
    fn view_angles(&self, v: Vec3) -> (f64, f64) {
        let depth = v.dot(self.forward);
        let h = v.dot(self.right()).atan2(depth).to_degrees();
        let vert = v.dot(self.up).atan2(depth).to_degrees();
        (h, vert)
    }
}

/// True iff `p` is in front of the apex and within both half-fields.
pub fn frustum_contains(f: &Frustum, p: Vec3) -> bool {
    let v = p - f.apex;
    if v.dot(f.forward) <= 0.0 {
        return false;
    }
    let (h, vert) = f.view_angles(v);
    h.abs() <= f.hfov_deg / 2.0 && vert.abs() <= f.vfov_deg / 2.0
}

/// Returns `p` unchanged when visible; otherwise the point at the same range
/// from the apex whose view angles are clamped to the boundary, inset by
/// [`CLAMP_INSET_DEG`] (or half the half-field for very narrow frusta).
pub fn clamp_to_frustum(f: &Frustum, p: Vec3) -> Result<Vec3, GeometryError> {
    if !p.is_finite() {
        return Err(GeometryError::NonFinite("point"));
    }
    let v = p - f.apex;
    let range = v.norm();
    if range == 0.0 {
        return Err(GeometryError::PointAtApex);
    }
    if frustum_contains(f, p) {
        return Ok(p);
    }
    let limit = |half: f64| half - CLAMP_INSET_DEG.min(half / 2.0);
    let h_lim = limit(f.hfov_deg / 2.0);
    let v_lim = limit(f.vfov_deg / 2.0);
    let (h, vert) = f.view_angles(v);
    let h = h.clamp(-h_lim, h_lim).to_radians();
    let vert = vert.clamp(-v_lim, v_lim).to_radians();
    let dir = (f.forward + f.right() * h.tan() + f.up * vert.tan()).normalized()?;
    Ok(f.apex + dir * range)
}
