use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3, SVD};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Rotation followed by translation: `p' = R p + t`.
///
/// Maps robot-map coordinates into the shared world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

fn to_na(v: Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

fn from_na(v: Vector3<f64>) -> Vec3 {
    Vec3::new(v.x, v.y, v.z)
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::ZERO,
        }
    }

    /// Quaternion given as `[w, x, y, z]`; normalized on the way in.
    pub fn from_parts(quat_wxyz: [f64; 4], translation: Vec3) -> Result<Self, GeometryError> {
        let q = Quaternion::new(quat_wxyz[0], quat_wxyz[1], quat_wxyz[2], quat_wxyz[3]);
        if !q.coords.iter().all(|c| c.is_finite()) || q.norm() == 0.0 {
            return Err(GeometryError::NonFinite("quaternion"));
        }
        if !translation.is_finite() {
            return Err(GeometryError::NonFinite("translation"));
        }
        Ok(RigidTransform {
            rotation: UnitQuaternion::from_quaternion(q),
            translation,
        })
    }

    pub fn from_axis_angle(axis: Vec3, angle_rad: f64, translation: Vec3) -> Self {
        let axis = nalgebra::Unit::new_normalize(to_na(axis));
        RigidTransform {
            rotation: UnitQuaternion::from_axis_angle(&axis, angle_rad),
            translation,
        }
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let m = self.rotation.to_rotation_matrix();
        let m = m.matrix();
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Rotation magnitude in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        from_na(self.rotation * to_na(p)) + self.translation
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        from_na(self.rotation * to_na(v))
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -from_na(inv * to_na(self.translation)),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.apply(other.translation),
        }
    }

    /// Angle of the relative rotation between two transforms, radians.
    pub fn rotation_error(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform::identity()
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            rotation_wxyz: [f64; 4],
            translation: [f64; 3],
        }
        Repr {
            rotation_wxyz: self.quaternion_wxyz(),
            translation: self.translation.to_array(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            rotation_wxyz: [f64; 4],
            translation: [f64; 3],
        }
        let r = Repr::deserialize(d)?;
        RigidTransform::from_parts(r.rotation_wxyz, r.translation.into())
            .map_err(serde::de::Error::custom)
    }
}

/// Least-squares rigid alignment of robot points onto world points
/// (cross-covariance SVD, no scale, reflection suppressed).
pub fn align_frames(pairs: &[(Vec3, Vec3)]) -> Result<RigidTransform, GeometryError> {
    if pairs.len() < 3 {
        return Err(GeometryError::DegenerateCorrespondences(
            "at least 3 point pairs are required",
        ));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(GeometryError::NonFinite("correspondence"));
    }
    let n = pairs.len() as f64;
    let (mut src_c, mut dst_c) = (Vec3::ZERO, Vec3::ZERO);
    for (s, d) in pairs {
        src_c += *s;
        dst_c += *d;
    }
    src_c = src_c / n;
    dst_c = dst_c / n;

    let mut cov = Matrix3::<f64>::zeros();
    let mut spread = Matrix3::<f64>::zeros();
    for (s, d) in pairs {
        let a = to_na(*s - src_c);
        let b = to_na(*d - dst_c);
        cov += b * a.transpose();
        spread += a * a.transpose();
    }

    // Collinear or coincident robot points leave the rotation about the
    // line undetermined: the second singular value of the spread vanishes.
    let spread_sv = spread.singular_values();
    let mut sv: Vec<f64> = spread_sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= f64::EPSILON || sv[1] <= sv[0] * 1e-12 {
        return Err(GeometryError::DegenerateCorrespondences(
            "robot points are collinear or coincident",
        ));
    }

    let svd = SVD::new(cov, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(GeometryError::DegenerateCorrespondences(
                "SVD did not converge",
            ))
        }
    };
    let sign = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let r = u * correction * v_t;
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = dst_c - from_na(rotation * to_na(src_c));
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Root-mean-square of `|T p_robot - p_world|` over the pairs.
pub fn rms_residual(transform: &RigidTransform, pairs: &[(Vec3, Vec3)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|(s, d)| {
            let e = transform.apply(*s) - *d;
            e.dot(e)
        })
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 1.0),
        ]
    }

    #[test]
    fn identity_pairs_give_identity() {
        let pairs: Vec<_> = tri().into_iter().map(|p| (p, p)).collect();
        let t = align_frames(&pairs).unwrap();
        assert!(t.rotation_angle() < 1e-12);
        assert!(t.translation().norm() < 1e-12);
        assert!(rms_residual(&t, &pairs) < 1e-12);
    }

    #[test]
    fn pure_translation() {
        let off = Vec3::new(0.0, 0.0, 1.0);
        let pairs: Vec<_> = tri().into_iter().map(|p| (p, p + off)).collect();
        let t = align_frames(&pairs).unwrap();
        assert!(t.rotation_angle() < 1e-12);
        assert!((t.translation() - off).norm() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let two = vec![(Vec3::ZERO, Vec3::ZERO), (Vec3::X, Vec3::X)];
        assert!(matches!(
            align_frames(&two),
            Err(GeometryError::DegenerateCorrespondences(_))
        ));
        let line: Vec<_> = (0..5)
            .map(|i| {
                let p = Vec3::new(i as f64, 2.0 * i as f64, 0.5);
                (p, p)
            })
            .collect();
        assert!(matches!(
            align_frames(&line),
            Err(GeometryError::DegenerateCorrespondences(_))
        ));
        let same = vec![(Vec3::X, Vec3::ZERO); 4];
        assert!(align_frames(&same).is_err());
    }

    #[test]
    fn reflection_is_not_returned() {
        // World points are a mirror image; best proper rotation still has det +1.
        let src = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
        ];
        let pairs: Vec<_> = src
            .iter()
            .map(|p| (*p, Vec3::new(-p.x, p.y, p.z)))
            .collect();
        let t = align_frames(&pairs).unwrap();
        let m = t.rotation_matrix();
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert!((det - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = RigidTransform::from_axis_angle(
            Vec3::new(1.0, 2.0, -0.5),
            1.1,
            Vec3::new(3.0, -1.0, 2.0),
        );
        let id = t.compose(&t.inverse());
        assert!(id.rotation_angle() < 1e-9);
        assert!(id.translation().norm() < 1e-9);
        let q = t.quaternion_wxyz();
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }
}
