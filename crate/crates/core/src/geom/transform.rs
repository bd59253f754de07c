//! Rigid transforms on SE(3).

use super::{Matrix3, Point3, Vector3};
use crate::{Error, Result};

/// Orthonormality tolerance for validated constructors.
const ORTHO_TOL: f64 = 1e-9;

/// A rigid transform: rotation (det = +1 orthonormal matrix) plus translation.
///
/// Applies as `p' = R p + t`. Used for sensor poses, camera extrinsics and
/// frame changes between tactile and visual space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3,
    translation: Vector3,
}

impl RigidTransform {
    /// Builds a transform, validating that `rotation` is special orthogonal
    /// within `1e-9`.
    pub fn new(rotation: Matrix3, translation: Vector3) -> Result<Self> {
        let rtr = rotation.transpose() * rotation;
        let err = (rtr - Matrix3::identity()).norm();
        if err > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (|R^T R - I| = {err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation from an axis-angle vector (Rodrigues), plus translation.
    pub fn from_axis_angle(axis_angle: Vector3, translation: Vector3) -> Self {
        Self {
            rotation: rotation_from_axis_angle(axis_angle),
            translation,
        }
    }

    /// Camera-style pose: `eye` position looking toward `target`, with +z along
    /// the view direction and +y chosen from `up` (left-handed pixel layout is
    /// handled by the camera model, not here).
    pub fn look_at(eye: Point3, target: Point3, up: Vector3) -> Result<Self> {
        let forward = target - eye;
        let fnorm = forward.norm();
        if fnorm < 1e-12 {
            return Err(Error::InvalidTransform(
                "look_at eye and target coincide".into(),
            ));
        }
        let z = forward / fnorm;
        let x = up.cross(&z);
        let xnorm = x.norm();
        if xnorm < 1e-12 {
            return Err(Error::InvalidTransform(
                "look_at up vector parallel to view direction".into(),
            ));
        }
        let x = x / xnorm;
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Ok(Self {
            rotation,
            translation: eye.coords,
        })
    }

    pub fn rotation(&self) -> &Matrix3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vector3 {
        self.translation
    }

    /// `R p + t`.
    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Rotates a direction without translating.
    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    /// Composition: `(self ∘ other)(p) = self(other(p))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation as an axis-angle vector with angle in `[0, π]`.
    pub fn rotation_axis_angle(&self) -> Vector3 {
        axis_angle_from_rotation(&self.rotation)
    }
}

/// Rodrigues formula. A near-zero vector maps to the identity.
pub fn rotation_from_axis_angle(aa: Vector3) -> Matrix3 {
    let angle = aa.norm();
    if angle < 1e-300 {
        return Matrix3::identity();
    }
    let axis = aa / angle;
    let k = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Logarithm map of a rotation matrix, angle in `[0, π]`.
pub fn axis_angle_from_rotation(r: &Matrix3) -> Vector3 {
    let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
    let cos = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return Vector3::zeros();
    }
    if (std::f64::consts::PI - angle) < 1e-6 {
        // Near π the off-diagonal differences vanish; recover the axis from
        // the symmetric part instead.
        let b = (r + Matrix3::identity()) * 0.5;
        let axis = Vector3::new(b[(0, 0)].max(0.0).sqrt(), b[(1, 1)].max(0.0).sqrt(), b[(2, 2)].max(0.0).sqrt());
        let mut axis = axis;
        // Fix signs from the largest component.
        if axis.x >= axis.y && axis.x >= axis.z {
            axis.y = axis.y.copysign(b[(0, 1)]);
            axis.z = axis.z.copysign(b[(0, 2)]);
        } else if axis.y >= axis.z {
            axis.x = axis.x.copysign(b[(0, 1)]);
            axis.z = axis.z.copysign(b[(1, 2)]);
        } else {
            axis.x = axis.x.copysign(b[(0, 2)]);
            axis.y = axis.y.copysign(b[(1, 2)]);
        }
        let n = axis.norm();
        if n < 1e-12 {
            return Vector3::zeros();
        }
        return axis / n * angle;
    }
    let axis = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) / (2.0 * angle.sin());
    axis * angle
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_round_trip() {
        let t = RigidTransform::identity();
        let p = Point3::new(1.5, -2.0, 0.25);
        assert_eq!(t.apply_point(&p), p);
    }

    #[test]
    fn rejects_non_orthonormal() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn axis_angle_round_trip() {
        for aa in [
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(0.0, 0.0, 1e-9),
            Vector3::new(2.1, 1.2, -0.4),
        ] {
            let r = rotation_from_axis_angle(aa);
            let back = axis_angle_from_rotation(&r);
            let r2 = rotation_from_axis_angle(back);
            assert_relative_eq!(r, r2, epsilon = 1e-9);
        }
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(0.4, 1.1, -0.3),
            Vector3::new(0.5, 2.0, -1.0),
        );
        let id = t.compose(&t.inverse());
        assert_relative_eq!(*id.rotation(), Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(id.translation(), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn look_at_points_z_toward_target() {
        let t = RigidTransform::look_at(
            Point3::new(0.0, 0.0, -2.0),
            Point3::origin(),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let z = t.apply_vector(&Vector3::new(0.0, 0.0, 1.0));
        assert_relative_eq!(z, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }
}
