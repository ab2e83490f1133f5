//! Ray-cast corridor renderer and marker placement.
//!
//! The corridor is a closed box of six planes (floor, ceiling, two side walls,
//! end wall and entrance wall). Each plane is flat-shaded with a seeded value
//! noise texture and a distance falloff. Procedural colors never have a red
//! channel above the green or blue one, which reserves pure red for markers.

mod fisheye;
mod frame;
mod texture;

pub use fisheye::{apply_fisheye, rectify_fisheye};
pub use frame::{Frame, PpmError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    pixel_ray, project_with_depth, CameraModel, CorridorSpec, GeometryError, ImagePoint, Point3, Pose,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("pose {0:?} is outside the corridor")]
    PoseOutOfCorridor(Pose),
    #[error("no CBL point is visible for marker placement")]
    NoVisiblePlacement,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Physical marker edge length.
pub const MARKER_SIZE_M: f64 = 0.15;
/// Markers are never drawn smaller than this many pixels across.
pub const MIN_MARKER_PX: f64 = 3.0;
/// Minimum clearance between a marker's edge and the frame border.
pub const MARKER_MARGIN_PX: f64 = 5.0;
/// Minimum image distance between the two marker centers.
pub const MIN_MARKER_SEPARATION_PX: f64 = 20.0;
/// Step used when searching the CBL for a visible near-marker spot.
const NEAR_MARKER_STEP_M: f64 = 0.05;

/// Marker color in BGR order.
pub const MARKER_BGR: [u8; 3] = [0, 0, 255];
/// Red excess above which a pixel counts as marker-red.
pub const MARKER_RED_THRESHOLD: i32 = 64;

/// Red excess of a BGR pixel: `r - max(g, b)`. Non-positive for every
/// procedural texture color, `255 * coverage` for a marker blended over gray.
pub fn marker_redness(bgr: [u8; 3]) -> i32 {
    bgr[2] as i32 - (bgr[0].max(bgr[1]) as i32)
}

pub fn is_marker_red(bgr: [u8; 3]) -> bool {
    marker_redness(bgr) >= MARKER_RED_THRESHOLD
}

/// Two floor markers on the CBL, as used for bisector frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerPlacement {
    pub far_marker: Point3,
    pub near_marker: Point3,
}

impl MarkerPlacement {
    pub fn on_cbl(near_z: f64, far_z: f64) -> Self {
        Self {
            far_marker: Point3::new(0.0, 0.0, far_z),
            near_marker: Point3::new(0.0, 0.0, near_z),
        }
    }
}

/// Side length in pixels of a marker drawn at `depth` meters.
pub fn marker_side_px(camera: &CameraModel, depth: f64) -> f64 {
    (camera.focal_length() * MARKER_SIZE_M / depth).max(MIN_MARKER_PX)
}

/// Projects a marker and checks that the drawn square fits in the frame with
/// the required margin.
fn visible_marker(camera: &CameraModel, pose: &Pose, p: &Point3) -> Option<ImagePoint> {
    let (img, depth) = project_with_depth(camera, pose, p).ok()?;
    let half = marker_side_px(camera, depth) / 2.0;
    camera.contains(&img, MARKER_MARGIN_PX + half).then_some(img)
}

/// Chooses marker positions for a bisector frame: one at the far end of the
/// CBL, the other at the closest CBL point that is comfortably inside the
/// frame and well separated from the far one.
pub fn place_markers(
    corridor: &CorridorSpec,
    pose: &Pose,
    camera: &CameraModel,
) -> Result<MarkerPlacement, RenderError> {
    if !corridor.contains(pose) {
        return Err(RenderError::PoseOutOfCorridor(*pose));
    }
    let far = Point3::new(0.0, 0.0, corridor.length);
    let far_img = visible_marker(camera, pose, &far).ok_or(RenderError::NoVisiblePlacement)?;
    let mut k = 1u32;
    loop {
        let z = pose.z + NEAR_MARKER_STEP_M * k as f64;
        if z >= corridor.length {
            return Err(RenderError::NoVisiblePlacement);
        }
        let near = Point3::new(0.0, 0.0, z);
        if let Some(img) = visible_marker(camera, pose, &near) {
            if img.distance(&far_img) >= MIN_MARKER_SEPARATION_PX {
                return Ok(MarkerPlacement {
                    far_marker: far,
                    near_marker: near,
                });
            }
        }
        k += 1;
    }
}

/// Renders the view from `pose`. With `markers`, two red squares are drawn
/// at the markers' projected positions, scaled with inverse depth and
/// anti-aliased by exact pixel coverage.
pub fn render_frame(
    corridor: &CorridorSpec,
    pose: &Pose,
    camera: &CameraModel,
    markers: Option<&MarkerPlacement>,
) -> Result<Frame, RenderError> {
    corridor.validate()?;
    camera.validate()?;
    if !corridor.contains(pose) {
        return Err(RenderError::PoseOutOfCorridor(*pose));
    }
    let look = texture::Appearance::new(corridor.texture_seed);
    let origin = pose.origin();
    let mut frame = Frame::new(camera.image_width, camera.image_height);
    for j in 0..camera.image_height {
        for i in 0..camera.image_width {
            let p = ImagePoint::new(i as f64 + 0.5, j as f64 + 0.5);
            let dir = pixel_ray(camera, pose, &p);
            let hit = texture::cast(corridor, &origin, &dir);
            frame.set(i, j, look.shade(&hit));
        }
    }
    if let Some(m) = markers {
        // far first so the near marker stays on top if they ever overlap
        for marker in [&m.far_marker, &m.near_marker] {
            if let Ok((img, depth)) = project_with_depth(camera, pose, marker) {
                draw_marker(&mut frame, &img, marker_side_px(camera, depth));
            }
        }
    }
    Ok(frame)
}

fn draw_marker(frame: &mut Frame, center: &ImagePoint, side: f64) {
    let half = side / 2.0;
    let (u0, u1) = (center.u - half, center.u + half);
    let (v0, v1) = (center.v - half, center.v + half);
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    if u1 <= 0.0 || v1 <= 0.0 || u0 >= w || v0 >= h {
        return;
    }
    let i_range = (u0.max(0.0).floor() as u32)..(u1.min(w).ceil() as u32);
    let j_range = (v0.max(0.0).floor() as u32)..(v1.min(h).ceil() as u32);
    for j in j_range {
        let cov_v = (v1.min(j as f64 + 1.0) - v0.max(j as f64)).max(0.0);
        for i in i_range.clone() {
            let cov_u = (u1.min(i as f64 + 1.0) - u0.max(i as f64)).max(0.0);
            let alpha = cov_u * cov_v;
            if alpha <= 0.0 {
                continue;
            }
            let bg = frame.get(i, j);
            let mut px = [0u8; 3];
            for c in 0..3 {
                let mixed = bg[c] as f64 * (1.0 - alpha) + MARKER_BGR[c] as f64 * alpha;
                px[c] = mixed.round().clamp(0.0, 255.0) as u8;
            }
            frame.set(i, j, px);
        }
    }
}
