//! Capture grid, synthetic dataset generation and input preprocessing.
//!
//! Each corridor is sampled at evenly spaced stations. At every station the
//! UAV takes nine poses: three lateral positions (left, center, right) times
//! three headings (left, straight, right). Angle labels come from bisector
//! frames rendered with zero yaw at each lateral position; distance labels
//! come from bisector frames rendered on the CBL at each heading, so only the
//! three centered poses carry one.

mod manifest;
mod preprocess;

pub use manifest::{Manifest, ManifestRecord};
pub use preprocess::{depreprocess, preprocess, PreprocessConfig, Tensor3};

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraModel, CorridorSpec, Pose};
use crate::labeler::label_sample;
use crate::render::{place_markers, render_frame, Frame, RenderError};

/// Nominal flight height for every capture.
pub const CAPTURE_HEIGHT_M: f64 = 1.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("station spacing {spacing} m exceeds corridor length {length} m")]
    EmptyGrid { spacing: f64, length: f64 },
    #[error("invalid capture grid: {0}")]
    InvalidGrid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Ppm(#[from] crate::render::PpmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Which deviation signal a sample or model refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Angle,
    Distance,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Angle => "angle",
            Target::Distance => "distance",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "angle" => Ok(Target::Angle),
            "distance" => Ok(Target::Distance),
            other => Err(format!("unknown target {other:?} (expected angle|distance)")),
        }
    }
}

/// Lateral offsets and headings sampled at every station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureGrid {
    pub station_spacing: f64,
    /// `[left, center, right]`, signed meters.
    pub lateral_offsets: [f64; 3],
    /// `[left, straight, right]`, radians.
    pub tilts: [f64; 3],
}

/// Corridor-independent recipe for a [`CaptureGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub station_spacing: f64,
    /// Distance kept from each wall at the extreme lateral positions.
    pub wall_clearance: f64,
    pub tilt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            station_spacing: 2.0,
            wall_clearance: 0.2,
            tilt: 15f64.to_radians(),
        }
    }
}

impl CaptureGrid {
    pub fn for_corridor(corridor: &CorridorSpec, config: &GridConfig) -> Self {
        let edge = corridor.half_width() - config.wall_clearance;
        Self {
            station_spacing: config.station_spacing,
            lateral_offsets: [-edge, 0.0, edge],
            tilts: [config.tilt, 0.0, -config.tilt],
        }
    }

    pub fn validate(&self, corridor: &CorridorSpec) -> Result<(), DatasetError> {
        if !(self.station_spacing > 0.0) {
            return Err(DatasetError::InvalidGrid("station spacing must be positive".into()));
        }
        if self.station_spacing > corridor.length {
            return Err(DatasetError::EmptyGrid {
                spacing: self.station_spacing,
                length: corridor.length,
            });
        }
        if let Some(x) = self.lateral_offsets.iter().find(|x| x.abs() >= corridor.half_width()) {
            return Err(DatasetError::InvalidGrid(format!(
                "lateral offset {x} m is outside the corridor"
            )));
        }
        if let Some(t) = self.tilts.iter().find(|t| t.abs() >= std::f64::consts::FRAC_PI_2) {
            return Err(DatasetError::InvalidGrid(format!("tilt {t} rad too large")));
        }
        Ok(())
    }
}

const POSITION_NAMES: [&str; 3] = ["left", "center", "right"];

/// A pose on the capture grid with its grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPose {
    pub station: usize,
    pub lateral: usize,
    pub tilt: usize,
    pub pose: Pose,
}

impl GridPose {
    pub fn name(&self, corridor_id: &str) -> String {
        format!(
            "{corridor_id}_s{:03}_{}_{}",
            self.station, POSITION_NAMES[self.lateral], POSITION_NAMES[self.tilt]
        )
    }
}

/// All grid poses: `floor(length / spacing)` stations, nine poses each.
pub fn sample_grid(corridor: &CorridorSpec, grid: &CaptureGrid) -> Result<Vec<GridPose>, DatasetError> {
    grid.validate(corridor)?;
    let stations = (corridor.length / grid.station_spacing).floor() as usize;
    let mut poses = Vec::with_capacity(stations * 9);
    for station in 0..stations {
        let z = station as f64 * grid.station_spacing;
        for (lateral, x) in grid.lateral_offsets.iter().enumerate() {
            for (tilt, yaw) in grid.tilts.iter().enumerate() {
                poses.push(GridPose {
                    station,
                    lateral,
                    tilt,
                    pose: Pose::new(*x, z, CAPTURE_HEIGHT_M, *yaw),
                });
            }
        }
    }
    Ok(poses)
}

/// How network input frames are produced: rendered at `supersample` times the
/// input camera resolution and box-filtered down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputRendering {
    pub camera: CameraModel,
    pub supersample: u32,
}

impl Default for InputRendering {
    fn default() -> Self {
        Self {
            camera: CameraModel::regressor(),
            supersample: 2,
        }
    }
}

impl InputRendering {
    pub fn render(&self, corridor: &CorridorSpec, pose: &Pose) -> Result<Frame, RenderError> {
        let ss = self.supersample.max(1);
        let big = CameraModel {
            image_width: self.camera.image_width * ss,
            image_height: self.camera.image_height * ss,
            ..self.camera
        };
        let frame = render_frame(corridor, pose, &big, None)?;
        Ok(frame.resize(self.camera.image_width, self.camera.image_height))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorEntry {
    pub id: String,
    pub spec: CorridorSpec,
    pub split: Split,
}

/// `n` corridors of random dimensions. The last 21/80 of them (rounded) are
/// held out for testing; at least one corridor goes to each split when
/// `n >= 2`.
pub fn random_corridors(n: usize, seed: u64) -> Vec<CorridorEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_test = if n >= 2 {
        ((n as f64 * 21.0 / 80.0).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    (0..n)
        .map(|k| {
            let spec = CorridorSpec {
                width: rng.random_range(1.8..3.0),
                length: rng.random_range(16.0..30.0),
                height: rng.random_range(2.6..3.4),
                texture_seed: rng.random(),
            };
            CorridorEntry {
                id: format!("c{k:03}"),
                spec,
                split: if k >= n - n_test { Split::Test } else { Split::Train },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub grid: GridConfig,
    pub label_camera: CameraModel,
    pub input: InputRendering,
    /// Also keep the bisector frames on disk.
    pub write_bisector: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            label_camera: CameraModel::labeling(),
            input: InputRendering::default(),
            write_bisector: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub records: usize,
    pub angle_samples: usize,
    pub distance_samples: usize,
    pub angle_discards: usize,
    pub distance_discards: usize,
}

/// Everything rendered for one station, before it is written out.
struct StationOutput {
    frames: Vec<(String, Frame)>,
    records: Vec<ManifestRecord>,
    angle_discards: usize,
    distance_discards: usize,
}

fn bisector_label(
    corridor: &CorridorSpec,
    pose: &Pose,
    camera: &CameraModel,
) -> (Option<crate::labeler::LabelPair>, Option<Frame>) {
    let Ok(markers) = place_markers(corridor, pose, camera) else {
        return (None, None);
    };
    match render_frame(corridor, pose, camera, Some(&markers)) {
        Ok(frame) => (label_sample(&frame).kept(), Some(frame)),
        Err(_) => (None, None),
    }
}

fn render_station(
    entry: &CorridorEntry,
    poses: &[GridPose],
    config: &DatasetConfig,
) -> Result<StationOutput, DatasetError> {
    let corridor = &entry.spec;
    let mut out = StationOutput {
        frames: Vec::new(),
        records: Vec::new(),
        angle_discards: 0,
        distance_discards: 0,
    };
    // angle labels: zero-yaw bisector per lateral position
    let mut angle = [None; 3];
    // distance labels: on-CBL bisector per heading
    let mut distance = [None; 3];
    for gp in poses.iter().filter(|gp| gp.tilt == 1) {
        let (pair, frame) = bisector_label(corridor, &gp.pose, &config.label_camera);
        angle[gp.lateral] = pair.map(|p| p.angle);
        if gp.lateral == 1 {
            distance[gp.tilt] = pair.map(|p| p.distance);
        }
        if let (Some(frame), true) = (frame, config.write_bisector) {
            out.frames.push((format!("{}_bisector", gp.name(&entry.id)), frame));
        }
    }
    for gp in poses.iter().filter(|gp| gp.lateral == 1 && gp.tilt != 1) {
        let (pair, frame) = bisector_label(corridor, &gp.pose, &config.label_camera);
        distance[gp.tilt] = pair.map(|p| p.distance);
        if let (Some(frame), true) = (frame, config.write_bisector) {
            out.frames.push((format!("{}_bisector", gp.name(&entry.id)), frame));
        }
    }
    for gp in poses {
        let a = angle[gp.lateral];
        let d = if gp.lateral == 1 { distance[gp.tilt] } else { None };
        out.angle_discards += a.is_none() as usize;
        if gp.lateral == 1 {
            out.distance_discards += d.is_none() as usize;
        }
        if a.is_none() && d.is_none() {
            continue;
        }
        let name = gp.name(&entry.id);
        out.frames
            .push((name.clone(), config.input.render(corridor, &gp.pose)?));
        out.records.push(ManifestRecord {
            id: name.clone(),
            corridor_id: entry.id.clone(),
            split: entry.split,
            station: gp.station,
            frame: format!("frames/{name}.ppm"),
            pose: gp.pose,
            angle: a,
            distance: d,
        });
    }
    Ok(out)
}

/// Renders, labels and writes a dataset under `out_dir`:
/// `frames/*.ppm` plus `manifest.jsonl`. Unlabelable samples are dropped and
/// counted, never fatal.
pub fn generate(
    corridors: &[CorridorEntry],
    config: &DatasetConfig,
    out_dir: impl AsRef<Path>,
) -> Result<(Vec<ManifestRecord>, GenerationReport), DatasetError> {
    let out_dir = out_dir.as_ref();
    let frames_dir = out_dir.join("frames");
    std::fs::create_dir_all(&frames_dir)?;

    let mut jobs = Vec::new();
    for entry in corridors {
        entry.spec.validate().map_err(RenderError::from)?;
        let grid = CaptureGrid::for_corridor(&entry.spec, &config.grid);
        let poses = sample_grid(&entry.spec, &grid)?;
        for station in poses.chunks(9) {
            jobs.push((entry, station.to_vec()));
        }
    }
    let outputs: Vec<Result<StationOutput, DatasetError>> = jobs
        .par_iter()
        .map(|(entry, poses)| render_station(entry, poses, config))
        .collect();

    let mut records = Vec::new();
    let mut report = GenerationReport::default();
    for output in outputs {
        let output = output?;
        for (name, frame) in &output.frames {
            frame.save_ppm(frames_dir.join(format!("{name}.ppm")))?;
        }
        report.angle_discards += output.angle_discards;
        report.distance_discards += output.distance_discards;
        records.extend(output.records);
    }
    report.records = records.len();
    report.angle_samples = records.iter().filter(|r| r.angle.is_some()).count();
    report.distance_samples = records.iter().filter(|r| r.distance.is_some()).count();
    Manifest::write_jsonl(&records, out_dir.join("manifest.jsonl"))?;
    Ok((records, report))
}
