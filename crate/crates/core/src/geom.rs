//! Rigid-body poses, transforms and weighted pose statistics.
//!
//! Rotations are stored as unit quaternions inside [`RigidTransform`]; roll,
//! pitch and yaw only appear at the [`Pose6D`] boundary. Euler angles follow
//! the usual Z-Y-X convention: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Isometry3, Matrix3, Matrix6, Point3, Translation3, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("empty particle set")]
    EmptyParticleSet,
    #[error("pose and weight lists differ in length ({poses} vs {weights})")]
    LengthMismatch { poses: usize, weights: usize },
    #[error("weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("cannot parse pose: {0}")]
    Parse(String),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = a.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Signed shortest difference `a - b`, in `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// A 6-DoF pose: position in meters, attitude as roll/pitch/yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose6D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose6D {
    /// Builds a pose, wrapping all three angles into `(-pi, pi]`.
    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            z,
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_transform(self) -> RigidTransform {
        RigidTransform::from_pose(self)
    }
}

impl fmt::Display for Pose6D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            self.x, self.y, self.z, self.roll, self.pitch, self.yaw
        )
    }
}

impl FromStr for Pose6D {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values: Vec<f64> = s
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| GeomError::Parse(s.to_string())))
            .collect::<Result<_, _>>()?;
        if values.len() != 6 || values.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::Parse(s.to_string()));
        }
        Ok(Pose6D::new(
            values[0], values[1], values[2], values[3], values[4], values[5],
        ))
    }
}

/// A proper rigid transform (rotation + translation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform(Isometry3<f64>);

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self(Isometry3::identity())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self(Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::identity(),
        ))
    }

    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self(Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        ))
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_rpy(0.0, 0.0, yaw)
    }

    pub fn from_pose(p: Pose6D) -> Self {
        Self(Isometry3::from_parts(
            Translation3::new(p.x, p.y, p.z),
            UnitQuaternion::from_euler_angles(p.roll, p.pitch, p.yaw),
        ))
    }

    pub fn from_isometry(iso: Isometry3<f64>) -> Self {
        Self(iso)
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.0
    }

    pub fn to_pose(&self) -> Pose6D {
        let t = self.0.translation.vector;
        let (roll, pitch, yaw) = self.0.rotation.euler_angles();
        Pose6D::new(t.x, t.y, t.z, roll, pitch, yaw)
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.translation.vector
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.0.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.0.rotation.to_rotation_matrix().matrix()
    }

    /// Magnitude of the rotation part, in radians.
    pub fn rotation_angle(&self) -> f64 {
        self.0.rotation.angle()
    }

    /// `self ∘ other`: applying the result equals applying `other`, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut iso = self.0 * other.0;
        iso.rotation = UnitQuaternion::new_normalize(iso.rotation.into_inner());
        RigidTransform(iso)
    }

    pub fn inverse(&self) -> RigidTransform {
        RigidTransform(self.0.inverse())
    }

    /// Body-frame displacement between two poses of the same frame:
    /// `prev⁻¹ ∘ curr`.
    pub fn relative_motion(prev: &RigidTransform, curr: &RigidTransform) -> RigidTransform {
        prev.inverse().compose(curr)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (self.0 * Point3::from(*p)).coords
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.rotation * v
    }
}

/// Free-function form of [`RigidTransform::compose`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn inverse(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

pub fn relative_motion(prev: &RigidTransform, curr: &RigidTransform) -> RigidTransform {
    RigidTransform::relative_motion(prev, curr)
}

/// Covariance over `(x, y, z, roll, pitch, yaw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance6(pub Matrix6<f64>);

impl Covariance6 {
    pub fn zeros() -> Self {
        Self(Matrix6::zeros())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn diagonal(&self) -> [f64; 6] {
        let d = self.0.diagonal();
        [d[0], d[1], d[2], d[3], d[4], d[5]]
    }

    /// Sum of the diagonal entries (the linear-algebra trace).
    pub fn diagonal_sum(&self) -> f64 {
        self.0.trace()
    }

    /// Product of the diagonal entries.
    pub fn diagonal_product(&self) -> f64 {
        self.diagonal().iter().product()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..6).all(|i| (0..6).all(|j| (self.0[(i, j)] - self.0[(j, i)]).abs() <= tol))
    }

    /// Row-major copy of the matrix.
    pub fn to_rows(&self) -> [[f64; 6]; 6] {
        let mut rows = [[0.0; 6]; 6];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[(i, j)];
            }
        }
        rows
    }
}

fn circular_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (s, c) = values.fold((0.0, 0.0), |(s, c), (a, w)| (s + w * a.sin(), c + w * a.cos()));
    normalize_angle(s.atan2(c))
}

/// Weighted mean and covariance of a set of poses.
///
/// Positions are averaged linearly, angles with a weighted circular mean.
/// The covariance is taken over residuals about the mean, with angular
/// residuals wrapped into `(-pi, pi]`.
pub fn pose_statistics(
    poses: &[Pose6D],
    weights: &[f64],
) -> Result<(Pose6D, Covariance6), GeomError> {
    if poses.is_empty() {
        return Err(GeomError::EmptyParticleSet);
    }
    if poses.len() != weights.len() {
        return Err(GeomError::LengthMismatch {
            poses: poses.len(),
            weights: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(GeomError::WeightsNotNormalized(total));
    }

    let pairs = || poses.iter().zip(weights.iter().copied());
    let x = pairs().map(|(p, w)| w * p.x).sum();
    let y = pairs().map(|(p, w)| w * p.y).sum();
    let z = pairs().map(|(p, w)| w * p.z).sum();
    let roll = circular_mean(pairs().map(|(p, w)| (p.roll, w)));
    let pitch = circular_mean(pairs().map(|(p, w)| (p.pitch, w)));
    let yaw = circular_mean(pairs().map(|(p, w)| (p.yaw, w)));
    let mean = Pose6D::new(x, y, z, roll, pitch, yaw);

    let mut cov = Matrix6::zeros();
    for (p, w) in pairs() {
        let r = nalgebra::Vector6::new(
            p.x - mean.x,
            p.y - mean.y,
            p.z - mean.z,
            angle_diff(p.roll, mean.roll),
            angle_diff(p.pitch, mean.pitch),
            angle_diff(p.yaw, mean.yaw),
        );
        cov += w * r * r.transpose();
    }
    // Outer products are symmetric up to rounding; make it exact.
    let cov = (cov + cov.transpose()) * 0.5;
    Ok((mean, Covariance6(cov)))
}
