use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetError, Split, Target};
use crate::geometry::Pose;

/// One manifest line: an input frame and whichever labels survived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub corridor_id: String,
    pub split: Split,
    pub station: usize,
    /// Frame path relative to the manifest's directory.
    pub frame: String,
    pub pose: Pose,
    pub angle: Option<f64>,
    pub distance: Option<f64>,
}

impl ManifestRecord {
    pub fn label(&self, target: Target) -> Option<f64> {
        match target {
            Target::Angle => self.angle,
            Target::Distance => self.distance,
        }
    }
}

/// A loaded manifest together with the directory its frame paths are
/// relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| DatasetError::Manifest {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(Self {
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            records,
        })
    }

    pub fn write_jsonl(records: &[ManifestRecord], path: impl AsRef<Path>) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn frame_path(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.frame)
    }

    /// Records carrying a label for `target`, optionally restricted to one
    /// split.
    pub fn labeled(&self, target: Target, split: Option<Split>) -> Vec<&ManifestRecord> {
        self.records
            .iter()
            .filter(|r| r.label(target).is_some() && split.is_none_or(|s| r.split == s))
            .collect()
    }
}
