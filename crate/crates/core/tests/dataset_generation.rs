use std::collections::HashSet;

use corridornav::dataset::{generate, random_corridors, DatasetConfig, Manifest, Split};
use corridornav::geometry::{cbl_angle, cbl_distance, CameraModel, Pose};

fn small_corridors() -> Vec<corridornav::dataset::CorridorEntry> {
    let mut cs = random_corridors(3, 17);
    for c in &mut cs {
        c.spec.length = 8.0;
    }
    cs
}

#[test]
fn generated_labels_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let corridors = small_corridors();
    let (records, report) = generate(&corridors, &DatasetConfig::default(), dir.path()).unwrap();
    let stations = 3 * 4;
    assert!(report.angle_samples <= 9 * stations && report.distance_samples <= 3 * stations);
    assert_eq!(report.angle_samples + report.angle_discards, 9 * stations);
    assert_eq!(report.distance_samples + report.distance_discards, 3 * stations);
    // only the station closest to the end wall may lack room for both markers
    assert!(report.angle_samples >= 9 * (stations - 3), "{report:?}");
    assert!(records.iter().filter(|r| r.station < 3).count() == 9 * 9);

    let label_cam = CameraModel::labeling();
    for r in &records {
        let spec = corridors.iter().find(|c| c.id == r.corridor_id).unwrap().spec;
        assert!(dir.path().join(&r.frame).exists());
        if let Some(a) = r.angle {
            let expected = cbl_angle(&spec, &r.pose).unwrap();
            assert!((a - expected).abs() < 0.02, "{}: {a} vs {expected}", r.id);
        }
        if let Some(d) = r.distance {
            assert_eq!(r.pose.x, 0.0);
            let expected = cbl_distance(&spec, &Pose { x: 0.0, ..r.pose }, &label_cam).unwrap();
            assert!((d - expected).abs() < 0.01, "{}: {d} vs {expected}", r.id);
        }
    }

    let train: HashSet<_> = records
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| &r.corridor_id)
        .collect();
    let test: HashSet<_> = records
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| &r.corridor_id)
        .collect();
    assert!(!train.is_empty() && !test.is_empty());
    assert!(train.is_disjoint(&test));

    let loaded = Manifest::load(dir.path().join("manifest.jsonl")).unwrap();
    assert_eq!(loaded.records, records);
    // one zero-yaw bisector per lateral position, one on-CBL bisector per tilt
    for name in ["left_center", "right_center", "center_left", "center_right"] {
        let path = dir.path().join("frames").join(format!("c000_s000_{name}_bisector.ppm"));
        assert!(path.exists(), "{}", path.display());
    }
}

#[test]
fn generation_is_byte_identical() {
    let corridors = small_corridors();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = DatasetConfig::default();
    generate(&corridors[..1], &config, a.path()).unwrap();
    generate(&corridors[..1], &config, b.path()).unwrap();
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "manifest.jsonl"), read(b.path(), "manifest.jsonl"));
    for entry in std::fs::read_dir(a.path().join("frames")).unwrap() {
        let name = entry.unwrap().file_name();
        let rel = format!("frames/{}", name.to_string_lossy());
        assert_eq!(read(a.path(), &rel), read(b.path(), &rel), "{rel}");
    }
}
