//! Deviation estimators: a noise-injectable geometric oracle and a compact
//! convolutional regressor trained from scratch.

mod model_file;
mod network;
mod train;

pub use model_file::{load_model, save_model, Model, MODEL_MAGIC, MODEL_VERSION};
pub use network::{init_weights, Activation, ForwardCache, InputShape, LayerSpec, Network, RegressorSpec};
pub use train::{load_samples, lr_step, train, LrDecision, Sample, Sgd, TrainConfig, TrainOutcome, TrainReport};

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{preprocess, InputRendering, PreprocessConfig, Target};
use crate::geometry::{cbl_angle, cbl_distance, CameraModel, CorridorSpec, GeometryError, Pose};
use crate::render::{Frame, RenderError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch lengths differ: {predicted} predictions vs {targets} targets")]
    BatchMismatch { predicted: usize, targets: usize },
    #[error("no samples carry a {0} label")]
    EmptyDataset(Target),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid regressor spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Estimated translational (angle) and rotational (distance) deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationEstimate {
    /// Radians in `[0, pi]`.
    pub angle: f64,
    /// Unit interval.
    pub distance: f64,
}

impl DeviationEstimate {
    pub fn clamped(angle: f64, distance: f64) -> Self {
        Self {
            angle: angle.clamp(0.0, PI),
            distance: distance.clamp(0.0, 1.0),
        }
    }
}

/// What the vehicle sees at one capture instant.
#[derive(Debug, Clone, Copy)]
pub struct Capture<'a> {
    pub seq: u64,
    pub t: f64,
    pub corridor: &'a CorridorSpec,
    pub pose: Pose,
}

/// Anything that turns a capture into deviation readings. The distance is
/// requested separately because a control loop may not need it.
pub trait DeviationEstimator {
    fn angle(&mut self, capture: &Capture) -> Result<f64, EstimatorError>;
    fn distance(&mut self, capture: &Capture) -> Result<f64, EstimatorError>;

    fn estimate(&mut self, capture: &Capture) -> Result<DeviationEstimate, EstimatorError> {
        let angle = self.angle(capture)?;
        let distance = self.distance(capture)?;
        Ok(DeviationEstimate::clamped(angle, distance))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_angle: f64,
    pub sigma_distance: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            sigma_angle: 0.0,
            sigma_distance: 0.0,
            seed: 0,
        }
    }
}

/// Closed-form labels plus seeded Gaussian noise, clamped to range.
#[derive(Debug, Clone)]
pub struct OracleEstimator {
    camera: CameraModel,
    noise: NoiseConfig,
    angle_noise: Normal<f64>,
    distance_noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl OracleEstimator {
    pub fn new(camera: CameraModel, noise: NoiseConfig) -> Self {
        Self {
            camera,
            noise,
            angle_noise: Normal::new(0.0, noise.sigma_angle.max(0.0)).expect("finite sigma"),
            distance_noise: Normal::new(0.0, noise.sigma_distance.max(0.0)).expect("finite sigma"),
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        self.noise
    }

    /// One noisy reading of both signals.
    pub fn predict(&mut self, corridor: &CorridorSpec, pose: &Pose) -> Result<DeviationEstimate, EstimatorError> {
        let angle = self.noisy_angle(corridor, pose)?;
        let distance = self.noisy_distance(corridor, pose)?;
        Ok(DeviationEstimate { angle, distance })
    }

    fn noisy_angle(&mut self, corridor: &CorridorSpec, pose: &Pose) -> Result<f64, EstimatorError> {
        let clean = cbl_angle(corridor, pose)?;
        Ok((clean + self.angle_noise.sample(&mut self.rng)).clamp(0.0, PI))
    }

    fn noisy_distance(&mut self, corridor: &CorridorSpec, pose: &Pose) -> Result<f64, EstimatorError> {
        // a line beyond the frame margin reads as fully off to that side
        let clean = match cbl_distance(corridor, pose, &self.camera) {
            Ok(d) => d,
            Err(GeometryError::LineOutOfFrame) => {
                if pose.yaw > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Err(e) => return Err(e.into()),
        };
        Ok((clean + self.distance_noise.sample(&mut self.rng)).clamp(0.0, 1.0))
    }
}

impl DeviationEstimator for OracleEstimator {
    fn angle(&mut self, capture: &Capture) -> Result<f64, EstimatorError> {
        self.noisy_angle(capture.corridor, &capture.pose)
    }

    fn distance(&mut self, capture: &Capture) -> Result<f64, EstimatorError> {
        self.noisy_distance(capture.corridor, &capture.pose)
    }
}

/// Frames kept so a delayed distance query can reuse its capture's render.
const FRAME_CACHE: usize = 8;

/// Renders the capture and runs the trained angle and distance models on
/// it. Each capture is rendered once and reused for both queries.
pub struct RegressorEstimator {
    angle_model: Model,
    distance_model: Model,
    rendering: InputRendering,
    cached: VecDeque<(u64, Frame)>,
}

impl RegressorEstimator {
    pub fn new(angle_model: Model, distance_model: Model, rendering: InputRendering) -> Self {
        Self {
            angle_model,
            distance_model,
            rendering,
            cached: VecDeque::with_capacity(FRAME_CACHE),
        }
    }

    fn input(&mut self, capture: &Capture, config: &PreprocessConfig) -> Result<Vec<f64>, EstimatorError> {
        if let Some((_, frame)) = self.cached.iter().find(|(seq, _)| *seq == capture.seq) {
            return Ok(preprocess(frame, config).to_f64());
        }
        let frame = self.rendering.render(capture.corridor, &capture.pose)?;
        let input = preprocess(&frame, config).to_f64();
        if self.cached.len() == FRAME_CACHE {
            self.cached.pop_front();
        }
        self.cached.push_back((capture.seq, frame));
        Ok(input)
    }
}

impl DeviationEstimator for RegressorEstimator {
    fn angle(&mut self, capture: &Capture) -> Result<f64, EstimatorError> {
        let config = self.angle_model.preprocess;
        let input = self.input(capture, &config)?;
        Ok(self.angle_model.network.forward(&input)?.clamp(0.0, PI))
    }

    fn distance(&mut self, capture: &Capture) -> Result<f64, EstimatorError> {
        let config = self.distance_model.preprocess;
        let input = self.input(capture, &config)?;
        Ok(self.distance_model.network.forward(&input)?.clamp(0.0, 1.0))
    }
}

/// Mean absolute error of a batch.
pub fn mae_loss(predicted: &[f64], targets: &[f64]) -> Result<f64, EstimatorError> {
    if predicted.len() != targets.len() {
        return Err(EstimatorError::BatchMismatch {
            predicted: predicted.len(),
            targets: targets.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    let sum: f64 = predicted.iter().zip(targets).map(|(p, y)| (p - y).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

/// Derivative of [`mae_loss`] with respect to each prediction; zero at ties.
pub fn mae_grad(predicted: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = predicted.len() as f64;
    predicted
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            if p > y {
                1.0 / n
            } else if p < y {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect()
}
