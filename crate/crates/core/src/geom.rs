//! Pinhole camera and rigid-body geometry.
//!
//! World frame is z-up with the floor at `z = 0`. Poses map camera-frame
//! points into the world frame. Camera frame follows the usual optical
//! convention: +z forward, +x right, +y down. Pixel `(u, v)` addresses the
//! pixel whose integer coordinates are `(u, v)`, so the principal ray passes
//! through pixel `(cx, cy)`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not a proper orthonormal matrix (max deviation {0:e})")]
    NotARotation(f64),
    #[error("depth image is {got_w}x{got_h} but intrinsics expect {want_w}x{want_h}")]
    DimensionMismatch { got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
    #[error("depth image has {got} values, expected {want}")]
    BadDepthLength { got: usize, want: usize },
    #[error("depth image contains a non-finite value at index {0}")]
    NonFiniteDepth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeomError> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self, GeomError> {
        Self::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(GeomError::InvalidIntrinsics("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeomError::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeomError::InvalidIntrinsics("principal point outside the image".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame point seen at pixel `(u, v)` with depth `d`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, d: f64) -> Vec3 {
        Vec3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }
}

/// Rigid transform from camera frame to world frame.
///
/// Serialized row-major as the 3x4 matrix `[R | t]` (12 numbers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeomError> {
        let dev = orthonormal_deviation(&rotation);
        if !(dev <= ORTHONORMAL_TOL) || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeomError::NotARotation(dev));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// Rotation about the world z axis by `angle` radians.
    pub fn from_yaw(angle: f64, translation: Vec3) -> Self {
        let (s, c) = angle.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self { rotation, translation }
    }

    /// Camera at `eye` with its optical axis through `target`; image "up"
    /// follows `up` as closely as possible.
    ///
    /// Returns `None` when the viewing direction is degenerate or parallel
    /// to `up`.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Option<Self> {
        let forward = (target - eye).try_normalize(1e-12)?;
        let right = forward.cross(&up).try_normalize(1e-9)?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Some(Self { rotation, translation: eye })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
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

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Pose applying `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn to_row_major(&self) -> [f64; 12] {
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

    pub fn from_row_major(m: &[f64; 12]) -> Result<Self, GeomError> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vec3::new(m[3], m[7], m[11]))
    }

    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        (self.rotation - other.rotation).amax() <= tol && (self.translation - other.translation).amax() <= tol
    }
}

fn orthonormal_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = (r.transpose() * r - Matrix3::identity()).amax();
    let det = (r.determinant() - 1.0).abs();
    gram.max(det)
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = <[f64; 12]>::deserialize(deserializer)?;
        Pose::from_row_major(&m).map_err(serde::de::Error::custom)
    }
}

/// Row-major depth in meters; `0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, GeomError> {
        let want = width as usize * height as usize;
        if values.len() != want {
            return Err(GeomError::BadDepthLength { got: values.len(), want });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GeomError::NonFiniteDepth(i));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self { width, height, values: vec![0.0; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, depth: f32) {
        let w = self.width as usize;
        self.values[v as usize * w + u as usize] = if depth.is_finite() && depth > 0.0 { depth } else { 0.0 };
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&d| d > 0.0).count()
    }

    pub fn check_matches(&self, intr: &CameraIntrinsics) -> Result<(), GeomError> {
        if self.width != intr.width || self.height != intr.height {
            return Err(GeomError::DimensionMismatch {
                got_w: self.width,
                got_h: self.height,
                want_w: intr.width,
                want_h: intr.height,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// World point for pixel `(u, v)` at depth `d`.
#[inline]
pub fn backproject_pixel(u: u32, v: u32, d: f64, intr: &CameraIntrinsics, pose: &Pose) -> Vec3 {
    pose.transform_point(&intr.unproject(u as f64, v as f64, d))
}

/// One world-frame point per valid depth pixel, in row-major pixel order.
pub fn backproject(depth: &DepthImage, intr: &CameraIntrinsics, pose: &Pose) -> Result<PointCloud, GeomError> {
    depth.check_matches(intr)?;
    let w = depth.width;
    let points = depth
        .values
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, &d)| {
            let (u, v) = ((i % w as usize) as u32, (i / w as usize) as u32);
            backproject_pixel(u, v, d as f64, intr, pose)
        })
        .collect();
    Ok(PointCloud { points })
}

/// Sub-pixel image coordinate of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    /// Integer pixel containing this coordinate; pixel `i` covers
    /// `[i - 0.5, i + 0.5)`.
    pub fn pixel(&self) -> (u32, u32) {
        ((self.u + 0.5).floor() as u32, (self.v + 0.5).floor() as u32)
    }
}

/// Projects a world point into the image. `None` marks out-of-view: behind
/// the camera, or nearest pixel outside the image.
pub fn project(point: &Vec3, intr: &CameraIntrinsics, pose: &Pose) -> Option<PixelCoord> {
    let c = pose.inverse_transform_point(point);
    if !(c.z > 0.0) {
        return None;
    }
    let u = intr.fx * c.x / c.z + intr.cx;
    let v = intr.fy * c.y / c.z + intr.cy;
    let in_u = u >= -0.5 && u < intr.width as f64 - 0.5;
    let in_v = v >= -0.5 && v < intr.height as f64 - 0.5;
    (in_u && in_v).then_some(PixelCoord { u, v })
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 120.0, 32.0, 24.0, 64, 48).unwrap()
    }

    #[test]
    fn principal_ray_backprojects_onto_axis() {
        let intr = intr();
        let mut depth = DepthImage::zeros(64, 48);
        depth.set(32, 24, 2.0);
        let cloud = backproject(&depth, &intr, &Pose::identity()).unwrap();
        assert_eq!(cloud.points, vec![Vec3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn zero_depth_is_skipped() {
        let cloud = backproject(&DepthImage::zeros(64, 48), &intr(), &Pose::identity()).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn offset_pixel_with_translated_pose() {
        // u = cx + fx at depth 1 gives camera x = 1; pose shifts z by 1.
        let intr = CameraIntrinsics::new(10.0, 10.0, 5.0, 5.0, 20, 20).unwrap();
        let mut depth = DepthImage::zeros(20, 20);
        depth.set(15, 5, 1.0);
        let pose = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let cloud = backproject(&depth, &intr, &pose).unwrap();
        assert_eq!(cloud.points, vec![Vec3::new(1.0, 0.0, 2.0)]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = backproject(&DepthImage::zeros(10, 10), &intr(), &Pose::identity()).unwrap_err();
        assert!(matches!(err, GeomError::DimensionMismatch { .. }));
    }

    #[test]
    fn project_principal_ray_and_behind() {
        let intr = intr();
        let px = project(&Vec3::new(0.0, 0.0, 2.0), &intr, &Pose::identity()).unwrap();
        assert_eq!((px.u, px.v), (32.0, 24.0));
        assert!(project(&Vec3::new(0.0, 0.0, -1.0), &intr, &Pose::identity()).is_none());
        assert!(project(&Vec3::new(100.0, 0.0, 1.0), &intr, &Pose::identity()).is_none());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let p = Pose::look_at(Vec3::new(1.0, 2.0, 1.5), Vec3::new(3.0, -1.0, 0.2), Vec3::z()).unwrap();
        assert!(compose(&Pose::identity(), &p).approx_eq(&p, 0.0));
        assert!(compose(&p, &p.inverse()).approx_eq(&Pose::identity(), 1e-9));
    }

    #[test]
    fn two_quarter_turns_make_a_half_turn() {
        let q = Pose::from_yaw(FRAC_PI_2, Vec3::zeros());
        let half = compose(&q, &q);
        let expected = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert!((half.rotation() - expected).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Pose::new(m, Vec3::zeros()).is_err());
        assert!(Pose::new(m * 2.0, Vec3::zeros()).is_err());
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn pose_serializes_row_major() {
        let p = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[1.0,0.0,0.0,1.0,0.0,1.0,0.0,2.0,0.0,0.0,1.0,3.0]");
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-3.0..3.0f64, -1.0..1.0f64, -1.0..1.0f64, prop::array::uniform3(-5.0..5.0f64)).prop_map(
            |(yaw, pitch, roll, t)| {
                let r = nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw);
                Pose::new(*r.matrix(), Vec3::from(t)).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn project_inverts_backproject(
            pose in arb_pose(),
            fx in 50.0..400.0f64,
            fy in 50.0..400.0f64,
            w in 8u32..320,
            h in 8u32..240,
            fu in 0.0..1.0f64,
            fv in 0.0..1.0f64,
            d in 0.1..20.0f64,
        ) {
            let intr = CameraIntrinsics::new(fx, fy, w as f64 * 0.5, h as f64 * 0.5, w, h).unwrap();
            let u = ((w - 1) as f64 * fu).round() as u32;
            let v = ((h - 1) as f64 * fv).round() as u32;
            let p = backproject_pixel(u, v, d, &intr, &pose);
            let px = project(&p, &intr, &pose).expect("in view");
            prop_assert!((px.u - u as f64).abs() < 0.5);
            prop_assert!((px.v - v as f64).abs() < 0.5);
            prop_assert_eq!(px.pixel(), (u, v));
        }

        #[test]
        fn backproject_counts_valid_pixels(values in prop::collection::vec(prop_oneof![Just(0.0f32), 0.1f32..10.0], 48)) {
            let intr = CameraIntrinsics::new(10.0, 10.0, 4.0, 3.0, 8, 6).unwrap();
            let depth = DepthImage::new(8, 6, values).unwrap();
            let cloud = backproject(&depth, &intr, &Pose::identity()).unwrap();
            prop_assert_eq!(cloud.len(), depth.valid_count());
        }

        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            prop_assert!(left.approx_eq(&right, 1e-9));
        }

        #[test]
        fn look_at_points_the_optical_axis(eye in prop::array::uniform3(-3.0..3.0f64), target in prop::array::uniform3(-3.0..3.0f64)) {
            let (eye, target) = (Vec3::from(eye), Vec3::from(target));
            prop_assume!((target - eye).xy().norm() > 1e-3);
            let pose = Pose::look_at(eye, target, Vec3::z()).unwrap();
            let cam = pose.inverse_transform_point(&target);
            assert_relative_eq!(cam.x, 0.0, epsilon = 1e-9);
            assert_relative_eq!(cam.y, 0.0, epsilon = 1e-9);
            prop_assert!(cam.z > 0.0);
        }
    }
}
