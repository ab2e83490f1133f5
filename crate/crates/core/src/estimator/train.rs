use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_weights, mae_grad, mae_loss, EstimatorError, Model, Network, RegressorSpec};
use crate::dataset::{preprocess, Manifest, PreprocessConfig, Split, Target};
use crate::render::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Weight-decay coefficient added to every gradient.
    pub l2: f64,
    pub batch_size: usize,
    /// Consecutive iterations inspected for a loss plateau.
    pub plateau_window: usize,
    /// Relative loss spread below which the window counts as flat.
    pub plateau_tolerance: f64,
    pub lr_factor: f64,
    pub lr_floor: f64,
    /// Hard cap on mini-batch iterations.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            momentum: 0.9,
            l2: 1e-4,
            batch_size: 32,
            plateau_window: 5,
            plateau_tolerance: 1e-4,
            lr_factor: 5.0,
            lr_floor: 1e-15,
            max_iters: 3000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |m: &str| Err(EstimatorError::InvalidConfig(m.into()));
        if !(self.lr > self.lr_floor && self.lr_floor > 0.0) {
            return bad("need lr > lr_floor > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) || self.l2 < 0.0 {
            return bad("momentum must be in [0, 1) and l2 non-negative");
        }
        if self.batch_size == 0 || self.plateau_window == 0 || self.max_iters == 0 {
            return bad("batch size, plateau window and max_iters must be positive");
        }
        if !(self.lr_factor > 1.0) || !(self.plateau_tolerance > 0.0) {
            return bad("lr_factor must exceed 1 and plateau tolerance be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LrDecision {
    Keep(f64),
    Reduce(f64),
    Stop,
}

/// Divides the rate by `lr_factor` when the last `plateau_window` losses
/// are flat, and stops once that would take it below `lr_floor`.
pub fn lr_step(history: &[f64], lr: f64, config: &TrainConfig) -> LrDecision {
    let w = config.plateau_window;
    if history.len() < w {
        return LrDecision::Keep(lr);
    }
    let window = &history[history.len() - w..];
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = window.iter().sum::<f64>() / w as f64;
    let spread = max - min;
    let flat = if mean.abs() > 0.0 {
        spread / mean.abs() < config.plateau_tolerance
    } else {
        spread == 0.0
    };
    if !flat {
        return LrDecision::Keep(lr);
    }
    let next = lr / config.lr_factor;
    if next < config.lr_floor {
        LrDecision::Stop
    } else {
        LrDecision::Reduce(next)
    }
}

/// Momentum SGD with coupled L2 decay:
/// `g' = g + l2 w; v = mu v + g'; w -= lr v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub l2: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(n_params: usize, momentum: f64, l2: f64) -> Self {
        Self {
            momentum,
            l2,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        for ((w, g), v) in params.iter_mut().zip(grad).zip(self.velocity.iter_mut()) {
            let g = g + self.l2 * *w;
            *v = self.momentum * *v + g;
            *w -= lr * *v;
        }
    }
}

/// A preprocessed input with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub input: Vec<f64>,
    pub label: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainOutcome {
    /// The rate schedule reached its floor.
    LrFloor,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub target: Target,
    /// Training MAE of every mini-batch, in order.
    pub losses: Vec<f64>,
    /// Learning rate used for every mini-batch.
    pub lrs: Vec<f64>,
    pub outcome: TrainOutcome,
}

/// Loads and preprocesses every record of `split` (or all records) that
/// carries a `target` label.
pub fn load_samples(
    manifest: &Manifest,
    target: Target,
    split: Option<Split>,
    config: &PreprocessConfig,
) -> Result<Vec<Sample>, EstimatorError> {
    manifest
        .labeled(target, split)
        .into_iter()
        .map(|r| {
            let frame = Frame::load_ppm(manifest.frame_path(r)).map_err(crate::dataset::DatasetError::from)?;
            Ok(Sample {
                id: r.id.clone(),
                input: preprocess(&frame, config).to_f64(),
                label: r.label(target).expect("filtered on label"),
            })
        })
        .collect()
}

/// Trains one scalar regressor with MAE loss and momentum SGD on seeded,
/// per-epoch shuffled mini-batches.
pub fn train(
    samples: &[Sample],
    target: Target,
    spec: &RegressorSpec,
    preprocess: PreprocessConfig,
    config: &TrainConfig,
) -> Result<(Model, TrainReport), EstimatorError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(EstimatorError::EmptyDataset(target));
    }
    let mut net = init_weights(spec, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
    let mut sgd = Sgd::new(net.params().len(), config.momentum, config.l2);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut lr = config.lr;
    let mut history = Vec::new();
    let mut report = TrainReport {
        target,
        losses: Vec::new(),
        lrs: Vec::new(),
        outcome: TrainOutcome::MaxIters,
    };
    let mut grad = vec![0.0; net.params().len()];
    for _ in 0..config.max_iters {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size.min(samples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let loss = batch_step(&mut net, samples, &batch, &mut grad)?;
        sgd.step(net.params_mut(), &grad, lr);
        report.losses.push(loss);
        report.lrs.push(lr);
        history.push(loss);
        match lr_step(&history, lr, config) {
            LrDecision::Keep(_) => {}
            LrDecision::Reduce(next) => {
                lr = next;
                history.clear();
            }
            LrDecision::Stop => {
                report.outcome = TrainOutcome::LrFloor;
                break;
            }
        }
    }
    let model = Model {
        target,
        preprocess,
        network: net,
    };
    Ok((model, report))
}

/// Forward and backward over one mini-batch; leaves the mean gradient in
/// `grad` and returns the batch loss.
fn batch_step(net: &mut Network, samples: &[Sample], batch: &[usize], grad: &mut [f64]) -> Result<f64, EstimatorError> {
    grad.fill(0.0);
    let mut caches = Vec::with_capacity(batch.len());
    let mut preds = Vec::with_capacity(batch.len());
    let mut labels = Vec::with_capacity(batch.len());
    for &i in batch {
        let cache = net.forward_cached(&samples[i].input)?;
        preds.push(cache.output());
        labels.push(samples[i].label);
        caches.push(cache);
    }
    let loss = mae_loss(&preds, &labels)?;
    for (cache, d) in caches.iter().zip(mae_grad(&preds, &labels)) {
        if d != 0.0 {
            net.backward(cache, d, grad);
        }
    }
    Ok(loss)
}
