use super::{Frame, RenderError};
use crate::geometry::{fisheye_distort, fisheye_undistort, CameraModel, GeometryError, ImagePoint};

/// Resamples `frame` so that each output pixel holds the content found at
/// the source position `map(output pixel center)`; unmapped pixels are black.
fn remap<F>(frame: &Frame, map: F) -> Frame
where
    F: Fn(&ImagePoint) -> Option<ImagePoint>,
{
    let mut out = Frame::new(frame.width(), frame.height());
    for j in 0..frame.height() {
        for i in 0..frame.width() {
            let p = ImagePoint::new(i as f64 + 0.5, j as f64 + 0.5);
            let px = map(&p)
                .and_then(|src| frame.sample_bilinear(src.u, src.v))
                .map(|px| px.map(|c| c.round().clamp(0.0, 255.0) as u8))
                .unwrap_or([0, 0, 0]);
            out.set(i, j, px);
        }
    }
    out
}

/// Converts a rectilinear frame into the equidistant fisheye image the lens
/// described by `camera.fisheye` would produce.
pub fn apply_fisheye(frame: &Frame, camera: &CameraModel) -> Result<Frame, RenderError> {
    camera.fisheye.ok_or(GeometryError::NoFisheye)?;
    Ok(remap(frame, |p| fisheye_undistort(p, camera).ok()))
}

/// Converts a fisheye frame back to its rectilinear equivalent.
pub fn rectify_fisheye(frame: &Frame, camera: &CameraModel) -> Result<Frame, RenderError> {
    camera.fisheye.ok_or(GeometryError::NoFisheye)?;
    Ok(remap(frame, |p| fisheye_distort(p, camera).ok()))
}
