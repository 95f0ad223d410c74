//! Rigid transforms in SE(3).

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Orthonormality tolerance for rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A rigid transform `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from an exactly orthonormal rotation (within
    /// [`ROTATION_TOLERANCE`]).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let residual = orthonormality_residual(&rotation);
        if !residual.is_finite() || residual > ROTATION_TOLERANCE {
            return Err(Error::contract(format!(
                "rotation is not orthonormal (residual {residual:e})"
            )));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("translation is not finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Like [`Pose::new`], but projects a slightly drifted rotation onto the
    /// nearest rotation matrix instead of rejecting it. Text-encoded poses
    /// carry rounding error of roughly 1e-7, so this is the entry point for
    /// parsed data. Matrices far from orthogonal are still rejected.
    pub fn new_reorthonormalized(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::contract("pose contains non-finite values"));
        }
        let rotation = if orthonormality_residual(&rotation) > ROTATION_TOLERANCE {
            nearest_rotation(&rotation)?
        } else {
            rotation
        };
        Self::new(rotation, translation)
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Rotation of `angle` radians about `axis`, followed by `translation`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = match nalgebra::Unit::try_new(axis, 1e-12) {
            Some(axis) => *Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        Self {
            rotation,
            translation,
        }
    }

    /// Rotation about +z (yaw) followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Self::from_axis_angle(Vector3::z(), yaw, translation)
    }

    /// Row-major 3×4 `[R | t]`, the layout of odometry pose files.
    pub fn from_row_major_3x4(values: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
            values[10],
        );
        let translation = Vector3::new(values[3], values[7], values[11]);
        Self::new_reorthonormalized(rotation, translation)
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Largest elementwise difference between the two 4×4 matrices.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).amax()
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// Transform carrying points from frame `i` into frame `0`, given both
/// frames' world poses: `pose_0⁻¹ ∘ pose_i`.
pub fn relative_pose(pose_i: &Pose, pose_0: &Pose) -> Pose {
    pose_0.inverse().compose(pose_i)
}

/// max(|RᵀR − I|, |det R − 1|)
pub fn orthonormality_residual(r: &Matrix3<f64>) -> f64 {
    let gram = (r.transpose() * r - Matrix3::identity()).amax();
    gram.max((r.determinant() - 1.0).abs())
}

fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::contract(
            "SVD failed while re-orthonormalizing rotation",
        ));
    };
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    // Reject inputs that were nowhere near a rotation to begin with.
    if (r - m).amax() > 1e-3 {
        return Err(Error::contract(
            "rotation block is too far from orthonormal to repair",
        ));
    }
    Ok(r)
}
