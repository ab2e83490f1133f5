//! Render-and-detect labels against the closed-form labels.

use corridornav::geometry::{cbl_angle, cbl_distance, project_point, CameraModel, CorridorSpec, Pose};
use corridornav::labeler::{
    angle_from_markers, detect_markers, distance_from_markers, label_sample, LabelError, Labeled,
};
use corridornav::render::{place_markers, render_frame, MarkerPlacement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bisector(c: &CorridorSpec, pose: &Pose, cam: &CameraModel) -> Option<Labeled> {
    let m = place_markers(c, pose, cam).ok()?;
    Some(label_sample(&render_frame(c, pose, cam, Some(&m)).unwrap()))
}

#[test]
fn centered_frame_labels() {
    let c = CorridorSpec::new(2.0, 20.0, 3.0, 11).unwrap();
    let cam = CameraModel::labeling();
    let pose = Pose::new(0.0, 1.0, 1.0, 0.0);
    let m = place_markers(&c, &pose, &cam).unwrap();
    let f = render_frame(&c, &pose, &cam, Some(&m)).unwrap();
    let (near, far) = detect_markers(&f).unwrap();
    for (p, world) in [(near, m.near_marker), (far, m.far_marker)] {
        let expected = project_point(&cam, &pose, &world).unwrap();
        assert!((p.u - expected.u).abs() < 1.0 && (p.v - expected.v).abs() < 1.0);
        assert!((p.u - 160.0).abs() < 1.0);
    }
    let pair = label_sample(&f).kept().unwrap();
    assert!((pair.angle - std::f64::consts::FRAC_PI_2).abs() < 0.02);
    assert!((pair.distance - 0.5).abs() < 0.01);
}

#[test]
fn left_of_cbl_angle_matches_closed_form() {
    let c = CorridorSpec::new(3.0, 20.0, 3.0, 2).unwrap();
    let cam = CameraModel::labeling();
    let pose = Pose::new(-1.0, 0.5, 1.0, 0.0);
    let m = place_markers(&c, &pose, &cam).unwrap();
    let f = render_frame(&c, &pose, &cam, Some(&m)).unwrap();
    let (near, far) = detect_markers(&f).unwrap();
    let angle = angle_from_markers(&near, &far).unwrap();
    assert!((angle - cbl_angle(&c, &pose).unwrap()).abs() < 0.02, "{angle}");
    assert!(angle < std::f64::consts::FRAC_PI_2);
}

#[test]
fn tilted_distance_matches_closed_form() {
    let c = CorridorSpec::new(2.0, 20.0, 3.0, 3).unwrap();
    let cam = CameraModel::labeling();
    let pose = Pose::new(0.0, 0.5, 1.0, 10f64.to_radians());
    let m = place_markers(&c, &pose, &cam).unwrap();
    let f = render_frame(&c, &pose, &cam, Some(&m)).unwrap();
    let (near, far) = detect_markers(&f).unwrap();
    let d = distance_from_markers(&near, &far, f.width(), f.height()).unwrap();
    assert!((d - 0.585).abs() < 0.01, "{d}");
    assert!((d - cbl_distance(&c, &pose, &cam).unwrap()).abs() < 0.01);
}

#[test]
fn merged_markers_are_not_found() {
    // a remnant of a few meters with both markers in its last decimeter
    let c = CorridorSpec::new(2.0, 10.0, 3.0, 3).unwrap();
    let cam = CameraModel::labeling();
    let pose = Pose::new(0.0, 7.0, 1.0, 0.0);
    let m = MarkerPlacement::on_cbl(9.92, 10.0);
    let f = render_frame(&c, &pose, &cam, Some(&m)).unwrap();
    assert_eq!(detect_markers(&f).err(), Some(LabelError::MarkersNotFound { found: 1 }));
}

#[test]
fn random_poses_agree_with_closed_form() {
    let cam = CameraModel::labeling();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut worst_a, mut worst_d, mut discards, mut n) = (0f64, 0f64, 0, 0);
    for k in 0..120 {
        let c = CorridorSpec::new(rng.random_range(1.8..3.0), rng.random_range(15.0..30.0), 3.0, k).unwrap();
        let pose = Pose::new(
            rng.random_range(-0.8..0.8) * c.half_width(),
            rng.random_range(0.0..0.8) * c.length,
            rng.random_range(0.8..1.2),
            rng.random_range(-15f64..15.0).to_radians(),
        );
        n += 2;
        match bisector(&c, &pose.with_yaw(0.0), &cam).and_then(|l| l.kept()) {
            Some(p) => worst_a = worst_a.max((p.angle - cbl_angle(&c, &pose).unwrap()).abs()),
            None => discards += 1,
        }
        match bisector(&c, &pose.with_x(0.0), &cam).and_then(|l| l.kept()) {
            Some(p) => worst_d = worst_d.max((p.distance - cbl_distance(&c, &pose, &cam).unwrap()).abs()),
            None => discards += 1,
        }
    }
    println!("worst angle {worst_a:.5} rad, worst distance {worst_d:.5}, discards {discards}/{n}");
    assert!(worst_a < 0.02);
    assert!(worst_d < 0.01);
    assert!((discards as f64) < 0.05 * n as f64);
}
