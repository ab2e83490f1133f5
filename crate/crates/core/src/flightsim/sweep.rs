use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, Outcome, SimConfig, SimError, WindConfig};
use crate::controller::ControllerConfig;
use crate::estimator::DeviationEstimator;
use crate::geometry::{CorridorSpec, Pose};

/// Range of randomized start poses: uniform in `[-max, max]` laterally and
/// in heading, at a fixed station and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartSampling {
    pub max_abs_x: f64,
    pub max_abs_yaw: f64,
    pub z: f64,
    pub h: f64,
}

impl Default for StartSampling {
    fn default() -> Self {
        Self {
            max_abs_x: 0.8,
            max_abs_yaw: 15f64.to_radians(),
            z: 0.0,
            h: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_episodes: usize,
    pub master_seed: u64,
    pub corridor: CorridorSpec,
    pub start: StartSampling,
    /// `sim.wind.seed` is replaced by a per-episode seed.
    pub sim: SimConfig,
    pub controller: ControllerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub index: usize,
    pub start: Pose,
    pub wind_seed: u64,
    pub estimator_seed: u64,
    pub outcome: Outcome,
    pub end_t: f64,
    pub max_abs_x: f64,
    pub mean_abs_x: f64,
    /// Largest |x| once past the first quarter of the corridor.
    pub steady_max_abs_x: Option<f64>,
}

impl EpisodeSummary {
    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::EndReached
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub collisions: usize,
    pub outcomes: BTreeMap<String, usize>,
    pub mean_abs_x: f64,
    pub max_abs_x: f64,
    pub steady_max_abs_x: f64,
    pub episodes: Vec<EpisodeSummary>,
}

/// Runs `n_episodes` seeded episodes in parallel. Start poses and seeds are
/// drawn up front from `master_seed`, so the result does not depend on
/// scheduling. `make_estimator` receives each episode's estimator seed.
pub fn run_sweep<E, F>(config: &SweepConfig, make_estimator: F) -> Result<SweepSummary, SimError>
where
    E: DeviationEstimator,
    F: Fn(u64) -> E + Sync,
{
    if config.n_episodes == 0 {
        return Err(SimError::InvalidConfig("a sweep needs at least one episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let s = config.start;
    let plans: Vec<(Pose, u64, u64)> = (0..config.n_episodes)
        .map(|_| {
            let x = rng.random_range(-s.max_abs_x..=s.max_abs_x);
            let yaw = rng.random_range(-s.max_abs_yaw..=s.max_abs_yaw);
            (Pose::new(x, s.z, s.h, yaw), rng.random(), rng.random())
        })
        .collect();

    let episodes: Vec<EpisodeSummary> = plans
        .par_iter()
        .enumerate()
        .map(|(index, (start, wind_seed, estimator_seed))| {
            let sim = SimConfig {
                wind: WindConfig {
                    sigma: config.sim.wind.sigma,
                    seed: *wind_seed,
                },
                ..config.sim
            };
            let mut estimator = make_estimator(*estimator_seed);
            let trace = run_episode(&config.corridor, *start, &mut estimator, &config.controller, &sim)?;
            Ok(EpisodeSummary {
                index,
                start: *start,
                wind_seed: *wind_seed,
                estimator_seed: *estimator_seed,
                outcome: trace.outcome,
                end_t: trace.end_t,
                max_abs_x: trace.max_abs_x(),
                mean_abs_x: trace.mean_abs_x(),
                steady_max_abs_x: trace.steady_max_abs_x(),
            })
        })
        .collect::<Result<_, SimError>>()?;

    let n = episodes.len();
    let successes = episodes.iter().filter(|e| e.succeeded()).count();
    let mut outcomes = BTreeMap::new();
    for e in &episodes {
        *outcomes.entry(format!("{:?}", e.outcome)).or_insert(0) += 1;
    }
    Ok(SweepSummary {
        n_episodes: n,
        successes,
        success_rate: successes as f64 / n as f64,
        collisions: episodes.iter().filter(|e| e.outcome == Outcome::WallCollision).count(),
        outcomes,
        mean_abs_x: episodes.iter().map(|e| e.mean_abs_x).sum::<f64>() / n as f64,
        max_abs_x: episodes.iter().map(|e| e.max_abs_x).fold(0.0, f64::max),
        steady_max_abs_x: episodes.iter().filter_map(|e| e.steady_max_abs_x).fold(0.0, f64::max),
        episodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindScan {
    /// `(sigma, success_rate)` for every scanned level, in order.
    pub levels: Vec<(f64, f64)>,
    /// Smallest scanned sigma whose success rate fell below 1.
    pub breaking_sigma: Option<f64>,
}

/// Repeats the sweep at increasing gust levels and records where the loop
/// first stops succeeding every time.
pub fn wind_scan<E, F>(config: &SweepConfig, sigmas: &[f64], make_estimator: F) -> Result<WindScan, SimError>
where
    E: DeviationEstimator,
    F: Fn(u64) -> E + Sync,
{
    let mut levels = Vec::with_capacity(sigmas.len());
    let mut breaking_sigma = None;
    for &sigma in sigmas {
        let mut c = *config;
        c.sim.wind.sigma = sigma;
        let summary = run_sweep(&c, &make_estimator)?;
        if summary.success_rate < 1.0 && breaking_sigma.is_none() {
            breaking_sigma = Some(sigma);
        }
        levels.push((sigma, summary.success_rate));
    }
    Ok(WindScan { levels, breaking_sigma })
}
