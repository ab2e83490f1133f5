//! Corridor world model, UAV pose, pinhole camera and the closed-form
//! central-bisector-line (CBL) labels.
//!
//! World frame: `x` lateral (positive to the right when looking down the
//! corridor, `x = 0` is the CBL), `y` up (floor at `y = 0`), `z` along the
//! corridor from the entrance. Yaw is positive to the left (counterclockwise
//! seen from above). Image frame: `u` grows to the right, `v` grows downwards,
//! pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid corridor: {0}")]
    InvalidCorridor(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("point is not in front of the camera")]
    Behind,
    #[error("pose is outside the corridor (|x| = {abs_x:.3} m, half width {half_width:.3} m)")]
    DegeneratePose { abs_x: f64, half_width: f64 },
    #[error("projected CBL does not cross the midline row near the frame")]
    LineOutOfFrame,
    #[error("point lies outside the fisheye field of view")]
    OutsideFov,
    #[error("camera has no fisheye parameters")]
    NoFisheye,
    #[error("image line endpoints coincide")]
    DegenerateLine,
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    /// Wall-to-wall width in meters.
    pub width: f64,
    pub length: f64,
    pub height: f64,
    pub texture_seed: u64,
}

impl CorridorSpec {
    pub fn new(width: f64, length: f64, height: f64, texture_seed: u64) -> Result<Self> {
        let corridor = Self {
            width,
            length,
            height,
            texture_seed,
        };
        corridor.validate()?;
        Ok(corridor)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("width", self.width), ("length", self.length), ("height", self.height)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::InvalidCorridor(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    /// Checks the lateral and height constraints a pose needs for the CBL
    /// labels to be defined.
    pub fn check_lateral(&self, pose: &Pose) -> Result<()> {
        let abs_x = pose.x.abs();
        if !(abs_x < self.half_width()) || !(pose.h > 0.0) {
            return Err(GeometryError::DegeneratePose {
                abs_x,
                half_width: self.half_width(),
            });
        }
        Ok(())
    }

    /// Full pose invariant: inside the corridor footprint, below the ceiling
    /// and yawed less than a quarter turn.
    pub fn contains(&self, pose: &Pose) -> bool {
        pose.x.abs() < self.half_width()
            && (0.0..=self.length).contains(&pose.z)
            && pose.h > 0.0
            && pose.h < self.height
            && pose.yaw.abs() < std::f64::consts::FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Signed lateral offset from the CBL, positive = right of the CBL.
    pub x: f64,
    /// Distance along the corridor from the entrance.
    pub z: f64,
    /// Height above the floor.
    pub h: f64,
    /// Heading, positive = turned left.
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, z: f64, h: f64, yaw: f64) -> Self {
        Self { x, z, h, yaw }
    }

    pub fn with_yaw(self, yaw: f64) -> Self {
        Self { yaw, ..self }
    }

    pub fn with_x(self, x: f64) -> Self {
        Self { x, ..self }
    }

    pub fn origin(&self) -> Point3 {
        Point3::new(self.x, self.h, self.z)
    }

    /// Camera axes in world coordinates: (right, down, forward).
    pub fn camera_axes(&self) -> (Point3, Point3, Point3) {
        let (s, c) = self.yaw.sin_cos();
        (
            Point3::new(c, 0.0, s),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(-s, 0.0, c),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn sub(&self, other: &Point3) -> Point3 {
        Point3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// A point on the image plane, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FisheyeModel {
    /// `r_d = f * theta`
    Equidistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fisheye {
    /// Full field of view of the lens, radians.
    pub fov: f64,
    pub model: FisheyeModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub image_width: u32,
    pub image_height: u32,
    pub horizontal_fov: f64,
    pub fisheye: Option<Fisheye>,
}

/// Default horizontal field of view, degrees.
pub const DEFAULT_HFOV_DEG: f64 = 92.0;

impl CameraModel {
    pub fn new(image_width: u32, image_height: u32, horizontal_fov: f64) -> Result<Self> {
        let camera = Self {
            image_width,
            image_height,
            horizontal_fov,
            fisheye: None,
        };
        camera.validate()?;
        Ok(camera)
    }

    /// Labeling camera: 320x180 with the reference field of view.
    pub fn labeling() -> Self {
        Self::new(320, 180, DEFAULT_HFOV_DEG.to_radians()).expect("valid default camera")
    }

    /// Regressor input camera: 80x45, same aspect and field of view as
    /// [`CameraModel::labeling`].
    pub fn regressor() -> Self {
        Self::new(80, 45, DEFAULT_HFOV_DEG.to_radians()).expect("valid default camera")
    }

    pub fn with_fisheye(mut self, fov: f64) -> Self {
        self.fisheye = Some(Fisheye {
            fov,
            model: FisheyeModel::Equidistant,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(GeometryError::InvalidCamera("image dimensions must be positive".into()));
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < std::f64::consts::PI) {
            return Err(GeometryError::InvalidCamera(format!(
                "horizontal fov must lie in (0, pi), got {}",
                self.horizontal_fov
            )));
        }
        if let Some(fe) = self.fisheye {
            if !(fe.fov > 0.0 && fe.fov < std::f64::consts::PI) {
                return Err(GeometryError::InvalidCamera(format!(
                    "fisheye fov must lie in (0, pi), got {}",
                    fe.fov
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.image_width as f64
    }

    pub fn height(&self) -> f64 {
        self.image_height as f64
    }

    /// Focal length in pixels; pixels are square.
    pub fn focal_length(&self) -> f64 {
        (self.width() / 2.0) / (self.horizontal_fov / 2.0).tan()
    }

    pub fn principal_point(&self) -> ImagePoint {
        ImagePoint::new(self.width() / 2.0, self.height() / 2.0)
    }

    /// Row index (continuous) of the horizontal midline of the image.
    pub fn midline_row(&self) -> f64 {
        self.height() / 2.0
    }

    pub fn contains(&self, p: &ImagePoint, margin: f64) -> bool {
        p.u >= margin && p.u <= self.width() - margin && p.v >= margin && p.v <= self.height() - margin
    }
}

/// Projects a world point into the (level) camera at `pose`.
///
/// Returns the point in camera coordinates `(right, down, forward)` alongside
/// its pixel position.
pub fn project_with_depth(camera: &CameraModel, pose: &Pose, world_point: &Point3) -> Result<(ImagePoint, f64)> {
    let (right, down, forward) = pose.camera_axes();
    let delta = world_point.sub(&pose.origin());
    let depth = delta.dot(&forward);
    if depth <= 1e-9 {
        return Err(GeometryError::Behind);
    }
    let f = camera.focal_length();
    let c = camera.principal_point();
    Ok((
        ImagePoint::new(c.u + f * delta.dot(&right) / depth, c.v + f * delta.dot(&down) / depth),
        depth,
    ))
}

pub fn project_point(camera: &CameraModel, pose: &Pose, world_point: &Point3) -> Result<ImagePoint> {
    project_with_depth(camera, pose, world_point).map(|(p, _)| p)
}

/// World-space direction of the ray through image point `p` (not normalized).
pub fn pixel_ray(camera: &CameraModel, pose: &Pose, p: &ImagePoint) -> Point3 {
    let (right, down, forward) = pose.camera_axes();
    let f = camera.focal_length();
    let c = camera.principal_point();
    let a = (p.u - c.u) / f;
    let b = (p.v - c.v) / f;
    Point3::new(
        right.x * a + down.x * b + forward.x,
        right.y * a + down.y * b + forward.y,
        right.z * a + down.z * b + forward.z,
    )
}

/// Angle of the projected CBL against the bottom image boundary.
///
/// The label is evaluated with zero yaw whatever the actual heading, so only
/// lateral offset and height matter: `pi/2` on the CBL, acute when the UAV is
/// left of it, obtuse when right. The angle is measured in native image
/// coordinates (rows growing downwards), i.e. from the leftward-pointing
/// bottom boundary.
pub fn cbl_angle(corridor: &CorridorSpec, pose: &Pose) -> Result<f64> {
    corridor.check_lateral(pose)?;
    // Projected CBL at zero yaw: u = cx - f x / t, v = cy + f h / t, so the
    // line direction is (x, -h) in pixel coordinates.
    Ok(pose.h.atan2(-pose.x))
}

/// Normalized horizontal position where the projected CBL crosses the
/// image's midline row.
///
/// Every line parallel to the corridor axis meets the midline row at the
/// vanishing point, so the value depends on yaw only:
/// `0.5 + (f / W) tan(yaw)`. Clamped to `[0, 1]`.
pub fn cbl_distance(corridor: &CorridorSpec, pose: &Pose, camera: &CameraModel) -> Result<f64> {
    corridor.check_lateral(pose)?;
    let u = vanishing_point(camera, pose.yaw)?.u;
    let w = camera.width();
    if !(-0.5 * w..=1.5 * w).contains(&u) {
        return Err(GeometryError::LineOutOfFrame);
    }
    Ok((u / w).clamp(0.0, 1.0))
}

/// Image of the point at infinity down the corridor axis.
pub fn vanishing_point(camera: &CameraModel, yaw: f64) -> Result<ImagePoint> {
    if yaw.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(GeometryError::LineOutOfFrame);
    }
    let c = camera.principal_point();
    Ok(ImagePoint::new(c.u + camera.focal_length() * yaw.tan(), c.v))
}

fn fisheye_of(camera: &CameraModel) -> Result<Fisheye> {
    camera.fisheye.ok_or(GeometryError::NoFisheye)
}

/// Maps a rectilinear image point to its position in the equidistant
/// fisheye image (`r_d = f * theta`).
pub fn fisheye_distort(point: &ImagePoint, camera: &CameraModel) -> Result<ImagePoint> {
    let fe = fisheye_of(camera)?;
    let c = camera.principal_point();
    let f = camera.focal_length();
    let (du, dv) = (point.u - c.u, point.v - c.v);
    let r_u = du.hypot(dv);
    if r_u == 0.0 {
        return Ok(c);
    }
    let theta = (r_u / f).atan();
    if theta > fe.fov / 2.0 {
        return Err(GeometryError::OutsideFov);
    }
    let scale = f * theta / r_u;
    Ok(ImagePoint::new(c.u + du * scale, c.v + dv * scale))
}

/// Inverse of [`fisheye_distort`].
pub fn fisheye_undistort(point: &ImagePoint, camera: &CameraModel) -> Result<ImagePoint> {
    let fe = fisheye_of(camera)?;
    let c = camera.principal_point();
    let f = camera.focal_length();
    let (du, dv) = (point.u - c.u, point.v - c.v);
    let r_d = du.hypot(dv);
    if r_d == 0.0 {
        return Ok(c);
    }
    let theta = r_d / f;
    if theta > fe.fov / 2.0 || theta >= std::f64::consts::FRAC_PI_2 {
        return Err(GeometryError::OutsideFov);
    }
    let scale = f * theta.tan() / r_d;
    Ok(ImagePoint::new(c.u + du * scale, c.v + dv * scale))
}

/// Line through two distinct image points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageLine {
    pub p1: ImagePoint,
    pub p2: ImagePoint,
}

impl ImageLine {
    pub fn new(p1: ImagePoint, p2: ImagePoint) -> Result<Self> {
        if p1.distance(&p2) < 1e-12 {
            return Err(GeometryError::DegenerateLine);
        }
        Ok(Self { p1, p2 })
    }

    /// Orientation in `[0, pi)` measured in native image coordinates.
    pub fn angle(&self) -> f64 {
        let (mut du, mut dv) = (self.p2.u - self.p1.u, self.p2.v - self.p1.v);
        // canonical direction (pointing down the image) keeps the result
        // independent of endpoint order
        if dv < 0.0 || (dv == 0.0 && du < 0.0) {
            du = -du;
            dv = -dv;
        }
        let a = dv.atan2(du);
        if a >= std::f64::consts::PI {
            0.0
        } else {
            a
        }
    }

    /// Column where the line crosses row `v`, if it is not horizontal.
    pub fn u_at_row(&self, v: f64) -> Option<f64> {
        let dv = self.p2.v - self.p1.v;
        if dv.abs() < 1e-12 {
            return None;
        }
        Some(self.p1.u + (v - self.p1.v) * (self.p2.u - self.p1.u) / dv)
    }
}
