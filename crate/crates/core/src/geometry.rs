//! Pinhole camera model, rigid poses and capture-unit calibration.
//!
//! Conventions: the world (stage) frame is right-handed, in meters, with z up.
//! A camera frame has z pointing forward, x to the right and y down. Depth is
//! always the camera-frame z coordinate, never the ray length. Pixel centers sit
//! on integer coordinates, so a raster of width `w` spans `[-0.5, w - 0.5)`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::math;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid depth {0} (must be > 0)")]
    InvalidDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("rotation is not orthonormal with det +1")]
    NotARotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Intrinsics { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Centered principal point with square pixels and the given horizontal
    /// field of view in degrees.
    pub fn from_hfov(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        let half = math::tan(hfov_deg.to_radians() / 2.0);
        let f = (width as f64 / 2.0) / half;
        Self::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if ![self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("zero raster size"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal length must be positive"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside raster"));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }

    /// Camera-frame direction through pixel `(u, v)` with unit z component.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Rigid transform mapping unit-local coordinates to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Mat3,
    translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let err = (rotation.transpose() * rotation - Mat3::identity()).amax();
        if err > ORTHO_TOL || (rotation.determinant() - 1.0).abs() > ORTHO_TOL {
            return Err(GeometryError::NotARotation);
        }
        Ok(Pose { rotation, translation })
    }

    pub fn identity() -> Self {
        Pose { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    /// Camera at `eye` looking at `target`, with the image "up" direction as
    /// close to `up` as possible. The camera y axis points down in the image.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        let forward = target - eye;
        let fnorm = forward.norm();
        if !(fnorm > 0.0) {
            return Err(GeometryError::NotARotation);
        }
        let z = forward / fnorm;
        let right = z.cross(&up);
        let rnorm = right.norm();
        if !(rnorm > 1e-12) {
            return Err(GeometryError::NotARotation);
        }
        let x = right / rnorm;
        let y = z.cross(&x);
        let r = Mat3::from_columns(&[x, y, z]);
        Pose::new(r, eye)
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCalibration {
    pub unit_id: u16,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    optical_axis: Vec3,
}

impl UnitCalibration {
    pub fn new(unit_id: u16, intrinsics: Intrinsics, pose: Pose) -> Result<Self, GeometryError> {
        intrinsics.validate()?;
        let axis = pose.rotation.column(2).into_owned();
        Ok(UnitCalibration { unit_id, intrinsics, pose, optical_axis: axis })
    }

    /// World-frame unit vector along the camera's +z axis.
    pub fn optical_axis(&self) -> Vec3 {
        self.optical_axis
    }
}

/// A point projected into a camera raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

/// Projects a world point. `Ok(None)` means the point is behind the camera or
/// falls outside the raster.
pub fn project_point(p: &Vec3, cal: &UnitCalibration) -> Result<Option<ImagePoint>, GeometryError> {
    if !p.iter().all(|c| c.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let c = cal.pose.inverse_transform_point(p);
    Ok(project_camera(&c, &cal.intrinsics))
}

/// Projects a point already expressed in the camera frame.
#[inline]
pub fn project_camera(c: &Vec3, k: &Intrinsics) -> Option<ImagePoint> {
    if c.z <= 0.0 {
        return None;
    }
    let u = k.fx * c.x / c.z + k.cx;
    let v = k.fy * c.y / c.z + k.cy;
    k.contains(u, v).then_some(ImagePoint { u, v, z: c.z })
}

pub fn back_project(u: f64, v: f64, z: f64, cal: &UnitCalibration) -> Result<Vec3, GeometryError> {
    if !(u.is_finite() && v.is_finite() && z.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if z <= 0.0 {
        return Err(GeometryError::InvalidDepth(z));
    }
    Ok(cal.pose.transform_point(&(cal.intrinsics.ray(u, v) * z)))
}
