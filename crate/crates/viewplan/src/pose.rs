//! Camera poses and yaw arithmetic.
//!
//! A pose maps camera coordinates to world coordinates: `p_world = R p_cam + t`.
//! The camera convention is x-right, y-down, z-forward (optical axis), and the
//! world up axis is +z. Yaw is the heading of the optical axis projected onto
//! the world xy-plane, wrapped into `(-pi, pi]`.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Degrees to radians.
pub fn deg_to_rad(d: f64) -> f64 {
    d * (PI / 180.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
    yaw: f64,
}

impl Pose {
    /// Builds a pose from a position and a `(w, x, y, z)` quaternion.
    ///
    /// The quaternion is normalized; a non-finite or near-zero quaternion is
    /// rejected. Yaw is derived from the orientation on construction.
    pub fn new(position: [f64; 3], quat_wxyz: [f64; 4]) -> Result<Self> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite position".into()));
        }
        if quat_wxyz.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite quaternion".into()));
        }
        let [w, x, y, z] = quat_wxyz;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() < 1e-9 {
            return Err(Error::InvalidPose("zero-norm quaternion".into()));
        }
        let orientation = UnitQuaternion::from_quaternion(q);
        let position = Vector3::new(position[0], position[1], position[2]);
        let yaw = yaw_of(&orientation);
        Ok(Pose {
            position,
            orientation,
            yaw,
        })
    }

    /// Builds a pose whose optical axis is horizontal at the given heading,
    /// with the image y axis pointing down (-z world).
    pub fn from_position_yaw(position: [f64; 3], yaw: f64) -> Self {
        let yaw = wrap_angle(yaw);
        // Columns: camera x (right), y (down), z (forward).
        let fwd = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        let down = Vector3::new(0.0, 0.0, -1.0);
        let right = down.cross(&fwd);
        let m = nalgebra::Matrix3::from_columns(&[right, down, fwd]);
        let orientation =
            UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m));
        Pose {
            position: Vector3::new(position[0], position[1], position[2]),
            orientation,
            yaw: yaw_of(&orientation),
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.orientation
    }

    /// Heading of the optical axis in the world xy-plane, in `(-pi, pi]`.
    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// Quaternion components in `(w, x, y, z)` order.
    pub fn quat_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Same orientation, displaced position.
    pub fn translated(&self, delta: Vector3<f64>) -> Pose {
        Pose {
            position: self.position + delta,
            orientation: self.orientation,
            yaw: self.yaw,
        }
    }

    /// Rotates the pose about the world up axis so its yaw becomes `new_yaw`,
    /// leaving roll and pitch unchanged.
    pub fn with_yaw(&self, new_yaw: f64) -> Pose {
        self.rotated_about_up(wrap_angle(new_yaw - self.yaw))
    }

    /// Rotates the orientation about the world up axis by `delta` radians.
    pub fn rotated_about_up(&self, delta: f64) -> Pose {
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), delta);
        let orientation = rz * self.orientation;
        Pose {
            position: self.position,
            orientation,
            yaw: yaw_of(&orientation),
        }
    }
}

/// Heading of the rotated optical axis, projected onto the world xy-plane.
///
/// Degenerate case (optical axis within 1e-12 of vertical): returns 0.0.
pub fn yaw_of(orientation: &UnitQuaternion<f64>) -> f64 {
    let fwd = orientation * Vector3::new(0.0, 0.0, 1.0);
    if fwd.x.abs() < 1e-12 && fwd.y.abs() < 1e-12 {
        0.0
    } else {
        fwd.y.atan2(fwd.x)
    }
}

/// Serialized pose: position, `(w, x, y, z)` quaternion, derived yaw.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PoseRecord {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
    pub yaw: f64,
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        PoseRecord {
            position: [p.position.x, p.position.y, p.position.z],
            quaternion: p.quat_wxyz(),
            yaw: p.yaw,
        }
    }
}

impl TryFrom<&PoseRecord> for Pose {
    type Error = Error;

    fn try_from(r: &PoseRecord) -> Result<Pose> {
        Pose::new(r.position, r.quaternion)
    }
}

pub fn unit_quat(axis: Unit<Vector3<f64>>, angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&axis, angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_maps_into_half_open_interval() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(1.5 * PI), -0.5 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-1.5 * PI), 0.5 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(5.0 * TAU + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn yaw_roundtrip_through_heading_constructor() {
        for &yaw in &[0.0, 0.3, -2.5, PI, -3.0] {
            let p = Pose::from_position_yaw([1.0, 2.0, 3.0], yaw);
            assert_abs_diff_eq!(p.yaw(), wrap_angle(yaw), epsilon = 1e-12);
        }
    }

    #[test]
    fn with_yaw_sets_heading_and_preserves_position() {
        let p = Pose::from_position_yaw([0.0, 0.0, 1.0], 0.4);
        let q = p.with_yaw(-1.2);
        assert_abs_diff_eq!(q.yaw(), -1.2, epsilon = 1e-12);
        assert_eq!(q.position(), p.position());
    }

    #[test]
    fn identity_quaternion_looks_along_plus_z() {
        let p = Pose::new([0.0; 3], [1.0, 0.0, 0.0, 0.0]).unwrap();
        let fwd = p.orientation() * Vector3::new(0.0, 0.0, 1.0);
        assert_abs_diff_eq!(fwd.z, 1.0, epsilon = 1e-15);
        // Vertical optical axis: yaw degenerates to 0.
        assert_eq!(p.yaw(), 0.0);
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert!(Pose::new([0.0; 3], [0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(Pose::new([0.0; 3], [f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }
}
