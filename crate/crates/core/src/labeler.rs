//! Label extraction from bisector frames: find the two marker blobs, join
//! them with a line and read off the CBL angle and pixel distance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, ImageLine, ImagePoint};
use crate::render::{is_marker_red, marker_redness, Frame};

/// Blobs need at least this many marker-red pixels to count.
pub const MIN_BLOB_PIXELS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("found {found} marker blob(s), need two")]
    MarkersNotFound { found: usize },
    #[error("marker line is degenerate")]
    DegenerateLine,
}

impl From<GeometryError> for LabelError {
    fn from(_: GeometryError) -> Self {
        LabelError::DegenerateLine
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPair {
    /// Radians in `[0, pi]`.
    pub angle: f64,
    /// Unit interval.
    pub distance: f64,
}

/// Outcome of labeling one bisector frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Labeled {
    Kept(LabelPair),
    Discarded(DiscardReason),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscardReason {
    Detection(LabelError),
    /// A recovered value fell outside its range before clamping.
    OutOfRange {
        angle: f64,
        distance: f64,
    },
}

impl Labeled {
    pub fn kept(&self) -> Option<LabelPair> {
        match self {
            Labeled::Kept(pair) => Some(*pair),
            Labeled::Discarded(_) => None,
        }
    }
}

struct Blob {
    pixels: usize,
    centroid: ImagePoint,
}

/// Locates the two largest marker-red blobs (8-connected) and returns their
/// centroids ordered lower-in-image first.
///
/// Centroids are weighted by red excess over the blob's bounding box grown
/// by one pixel, which recovers the anti-aliased edge pixels that fall below
/// the detection threshold.
pub fn detect_markers(frame: &Frame) -> Result<(ImagePoint, ImagePoint), LabelError> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let mut labels = vec![0u32; w * h];
    let mut blobs: Vec<Blob> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if labels[start] != 0 || !is_marker_red(px(frame, start % w, start / w)) {
            continue;
        }
        let id = blobs.len() as u32 + 1;
        labels[start] = id;
        stack.push(start);
        let mut count = 0usize;
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if labels[n] == 0 && is_marker_red(px(frame, nx as usize, ny as usize)) {
                        labels[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        let centroid = weighted_centroid(frame, &labels, id, (x0, y0, x1, y1));
        blobs.push(Blob {
            pixels: count,
            centroid,
        });
    }
    let mut kept: Vec<Blob> = blobs.into_iter().filter(|b| b.pixels >= MIN_BLOB_PIXELS).collect();
    if kept.len() < 2 {
        return Err(LabelError::MarkersNotFound { found: kept.len() });
    }
    kept.sort_by_key(|b| std::cmp::Reverse(b.pixels));
    let (a, b) = (kept[0].centroid, kept[1].centroid);
    Ok(if a.v >= b.v { (a, b) } else { (b, a) })
}

fn px(frame: &Frame, x: usize, y: usize) -> [u8; 3] {
    frame.get(x as u32, y as u32)
}

fn weighted_centroid(
    frame: &Frame,
    labels: &[u32],
    id: u32,
    (x0, y0, x1, y1): (usize, usize, usize, usize),
) -> ImagePoint {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
    for y in y0.saturating_sub(1)..(y1 + 2).min(h) {
        for x in x0.saturating_sub(1)..(x1 + 2).min(w) {
            let label = labels[y * w + x];
            if label != 0 && label != id {
                continue;
            }
            let weight = marker_redness(px(frame, x, y)).max(0) as f64;
            su += weight * (x as f64 + 0.5);
            sv += weight * (y as f64 + 0.5);
            sw += weight;
        }
    }
    ImagePoint::new(su / sw, sv / sw)
}

/// Angle of the infinite line through the two points against the bottom
/// image boundary, in `[0, pi)`. Measured in native image coordinates, so a
/// line leaning left as it rises (UAV left of the CBL) is acute.
pub fn angle_from_markers(p1: &ImagePoint, p2: &ImagePoint) -> Result<f64, LabelError> {
    Ok(ImageLine::new(*p1, *p2)?.angle())
}

/// Unclamped normalized column where the marker line crosses the midline row.
pub fn raw_distance_from_markers(p1: &ImagePoint, p2: &ImagePoint, width: u32, height: u32) -> Result<f64, LabelError> {
    let line = ImageLine::new(*p1, *p2)?;
    let u = line.u_at_row(height as f64 / 2.0).ok_or(LabelError::DegenerateLine)?;
    Ok(u / width as f64)
}

/// Normalized column where the marker line crosses the midline row, clamped
/// to `[0, 1]`.
pub fn distance_from_markers(p1: &ImagePoint, p2: &ImagePoint, width: u32, height: u32) -> Result<f64, LabelError> {
    Ok(raw_distance_from_markers(p1, p2, width, height)?.clamp(0.0, 1.0))
}

/// Full pipeline on one bisector frame. Failures discard the sample instead
/// of erroring.
pub fn label_sample(bisector: &Frame) -> Labeled {
    let (near, far) = match detect_markers(bisector) {
        Ok(points) => points,
        Err(e) => return Labeled::Discarded(DiscardReason::Detection(e)),
    };
    let angle = match angle_from_markers(&near, &far) {
        Ok(a) => a,
        Err(e) => return Labeled::Discarded(DiscardReason::Detection(e)),
    };
    let distance = match raw_distance_from_markers(&near, &far, bisector.width(), bisector.height()) {
        Ok(d) => d,
        Err(e) => return Labeled::Discarded(DiscardReason::Detection(e)),
    };
    if !(0.0..=std::f64::consts::PI).contains(&angle) || !(0.0..=1.0).contains(&distance) {
        return Labeled::Discarded(DiscardReason::OutOfRange { angle, distance });
    }
    Labeled::Kept(LabelPair { angle, distance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn vertical_line_is_right_angle() {
        let a = angle_from_markers(&ImagePoint::new(160.0, 170.0), &ImagePoint::new(160.0, 20.0));
        assert!((a.unwrap() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn diagonal_lines() {
        // rising to the right: obtuse in the native image convention
        let rising_right = angle_from_markers(&ImagePoint::new(100.0, 170.0), &ImagePoint::new(250.0, 20.0)).unwrap();
        assert!((rising_right - 3.0 * FRAC_PI_4).abs() < 1e-12);
        let rising_left = angle_from_markers(&ImagePoint::new(250.0, 170.0), &ImagePoint::new(100.0, 20.0)).unwrap();
        assert!((rising_left - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_rejected() {
        let p = ImagePoint::new(3.0, 4.0);
        assert_eq!(angle_from_markers(&p, &p), Err(LabelError::DegenerateLine));
        assert_eq!(distance_from_markers(&p, &p, 320, 180), Err(LabelError::DegenerateLine));
        // horizontal line never crosses the midline row
        assert_eq!(
            distance_from_markers(&ImagePoint::new(1.0, 4.0), &ImagePoint::new(9.0, 4.0), 320, 180),
            Err(LabelError::DegenerateLine)
        );
    }

    #[test]
    fn distance_normalization() {
        let d =
            |u: f64| distance_from_markers(&ImagePoint::new(u, 170.0), &ImagePoint::new(u, 20.0), 320, 180).unwrap();
        assert_eq!(d(160.0), 0.5);
        assert_eq!(d(80.0), 0.25);
        assert_eq!(d(-40.0), 0.0);
    }

    #[test]
    fn order_invariance() {
        let p1 = ImagePoint::new(37.0, 150.0);
        let p2 = ImagePoint::new(190.0, 61.0);
        assert_eq!(angle_from_markers(&p1, &p2), angle_from_markers(&p2, &p1));
        let a = distance_from_markers(&p1, &p2, 320, 180).unwrap();
        let b = distance_from_markers(&p2, &p1, 320, 180).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn empty_frame_has_no_markers() {
        let f = Frame::from_bgr(32, 18, vec![90; 32 * 18 * 3]).unwrap();
        assert_eq!(detect_markers(&f).err(), Some(LabelError::MarkersNotFound { found: 0 }));
        assert!(matches!(label_sample(&f), Labeled::Discarded(_)));
    }

    #[test]
    fn small_specks_are_ignored() {
        let mut f = Frame::from_bgr(32, 18, vec![90; 32 * 18 * 3]).unwrap();
        f.set(3, 3, [0, 0, 255]);
        f.set(20, 10, [0, 0, 255]);
        f.set(21, 10, [0, 0, 255]);
        assert_eq!(detect_markers(&f).err(), Some(LabelError::MarkersNotFound { found: 0 }));
    }

    #[test]
    fn hand_drawn_blobs_are_found_in_order() {
        let mut f = Frame::from_bgr(40, 40, vec![90; 40 * 40 * 3]).unwrap();
        for y in 30..33 {
            for x in 10..13 {
                f.set(x, y, [0, 0, 255]);
            }
        }
        for y in 5..8 {
            for x in 25..28 {
                f.set(x, y, [0, 0, 255]);
            }
        }
        let (near, far) = detect_markers(&f).unwrap();
        assert!((near.u - 11.5).abs() < 1e-9 && (near.v - 31.5).abs() < 1e-9);
        assert!((far.u - 26.5).abs() < 1e-9 && (far.v - 6.5).abs() < 1e-9);
    }
}
