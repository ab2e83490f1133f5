//! Closed-loop episodes: kinematic vehicle, delayed estimates, lateral
//! wind gusts and wall/end detection.
//!
//! Time advances in integer ticks of `dt`. A frame is captured every
//! capture period; its estimate reaches the controller one pipeline latency
//! later, and the resulting command is held until the next estimate lands.

mod sweep;
mod trace;

pub use sweep::{run_sweep, wind_scan, EpisodeSummary, StartSampling, SweepConfig, SweepSummary, WindScan};
pub use trace::{write_trace_csv, write_trace_jsonl};

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{decide, ControlCommand, ControllerConfig, ControllerState};
use crate::estimator::{Capture, DeviationEstimator, EstimatorError};
use crate::geometry::{CorridorSpec, Pose};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial pose {0:?} is not safely inside the corridor")]
    InvalidInitialPose(Pose),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("estimator failed at t = {t:.2} s: {source}")]
    Estimator {
        t: f64,
        #[source]
        source: EstimatorError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindConfig {
    /// Standard deviation of the lateral gust velocity, m/s.
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub forward_speed: f64,
    pub lateral_speed: f64,
    pub yaw_rate: f64,
    pub latency_transport: f64,
    pub latency_inference: f64,
    /// Interval between captures. Frames are pipelined, so a new estimate
    /// can arrive every period while each one is a full latency old.
    pub capture_period: f64,
    pub wind: WindConfig,
    /// Lateral clearance at which the vehicle counts as hitting a wall.
    pub wall_margin: f64,
    /// Distance before the end wall at which the run is complete.
    pub end_margin: f64,
    pub max_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            forward_speed: 0.25,
            lateral_speed: 0.2,
            yaw_rate: 0.3,
            latency_transport: 0.21,
            latency_inference: 0.08,
            capture_period: 0.08,
            wind: WindConfig { sigma: 0.0, seed: 0 },
            wall_margin: 0.15,
            end_margin: 2.0,
            max_time: 300.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.forward_speed > 0.0 && self.lateral_speed > 0.0 && self.yaw_rate > 0.0) {
            return bad("speeds must be positive");
        }
        if !(self.latency_transport >= 0.0 && self.latency_inference >= 0.0) {
            return bad("latencies must be non-negative");
        }
        if !(self.capture_period > 0.0) {
            return bad("capture period must be positive");
        }
        if !(self.wind.sigma >= 0.0 && self.wall_margin >= 0.0 && self.end_margin >= 0.0) {
            return bad("wind sigma and margins must be non-negative");
        }
        if !(self.max_time > 0.0) {
            return bad("max_time must be positive");
        }
        Ok(())
    }

    pub fn latency(&self) -> f64 {
        self.latency_transport + self.latency_inference
    }

    pub fn latency_ticks(&self) -> u64 {
        (self.latency() / self.dt).round() as u64
    }

    /// Ticks between captures, at least one.
    pub fn period_ticks(&self) -> u64 {
        ((self.capture_period / self.dt).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    EndReached,
    WallCollision,
    Landed,
    Timeout,
}

/// A reading as the controller consumed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedEstimate {
    pub capture_seq: u64,
    pub capture_t: f64,
    pub angle: f64,
    /// Only present when the controller asked for it.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTick {
    pub tick: u64,
    pub t: f64,
    /// Pose at the start of the tick.
    pub pose: Pose,
    /// Estimate that arrived this tick, if any.
    pub estimate: Option<AppliedEstimate>,
    /// Command in force during this tick.
    pub command: ControlCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub corridor: CorridorSpec,
    pub ticks: Vec<TraceTick>,
    pub outcome: Outcome,
    /// Time at which the outcome was decided.
    pub end_t: f64,
    pub final_pose: Pose,
}

impl EpisodeTrace {
    pub fn max_abs_x(&self) -> f64 {
        self.ticks.iter().map(|t| t.pose.x.abs()).fold(0.0, f64::max)
    }

    pub fn mean_abs_x(&self) -> f64 {
        if self.ticks.is_empty() {
            return 0.0;
        }
        self.ticks.iter().map(|t| t.pose.x.abs()).sum::<f64>() / self.ticks.len() as f64
    }

    /// Ticks past the first quarter of the corridor.
    pub fn steady_state(&self) -> impl Iterator<Item = &TraceTick> {
        let from = 0.25 * self.corridor.length;
        self.ticks.iter().filter(move |t| t.pose.z >= from)
    }

    pub fn steady_max_abs_x(&self) -> Option<f64> {
        self.steady_state().map(|t| t.pose.x.abs()).reduce(f64::max)
    }
}

/// Advances the pose by one tick under `command` plus a lateral gust.
pub fn step(pose: &Pose, command: ControlCommand, sim: &SimConfig, gust: f64) -> Pose {
    let dt = sim.dt;
    let mut next = *pose;
    match command {
        ControlCommand::PitchForward => {
            next.z += sim.forward_speed * pose.yaw.cos() * dt;
            next.x -= sim.forward_speed * pose.yaw.sin() * dt;
        }
        ControlCommand::RollLeft => next.x -= sim.lateral_speed * dt,
        ControlCommand::RollRight => next.x += sim.lateral_speed * dt,
        ControlCommand::YawLeft => next.yaw += sim.yaw_rate * dt,
        ControlCommand::YawRight => next.yaw -= sim.yaw_rate * dt,
        ControlCommand::Hover | ControlCommand::Land => {}
    }
    next.x += gust * dt;
    next
}

/// Seeded gust source: one zero-mean Gaussian draw per control period,
/// clamped to three standard deviations.
#[derive(Debug, Clone)]
pub struct Disturbance {
    sigma: f64,
    normal: Normal<f64>,
    rng: ChaCha8Rng,
    pub lateral_gust: f64,
}

impl Disturbance {
    pub fn new(wind: WindConfig) -> Self {
        Self {
            sigma: wind.sigma,
            normal: Normal::new(0.0, wind.sigma.max(0.0)).expect("finite sigma"),
            rng: ChaCha8Rng::seed_from_u64(wind.seed),
            lateral_gust: 0.0,
        }
    }

    pub fn resample(&mut self) {
        let limit = 3.0 * self.sigma;
        self.lateral_gust = self.normal.sample(&mut self.rng).clamp(-limit, limit);
    }
}

struct Pending {
    seq: u64,
    capture_t: f64,
    pose: Pose,
    angle: f64,
    apply_tick: u64,
}

fn hit_wall(corridor: &CorridorSpec, pose: &Pose, sim: &SimConfig) -> bool {
    pose.x.abs() >= corridor.half_width() - sim.wall_margin
}

/// Flies one episode until the end is reached, the vehicle hits a wall or
/// lands, or time runs out.
pub fn run_episode(
    corridor: &CorridorSpec,
    start: Pose,
    estimator: &mut dyn DeviationEstimator,
    controller: &ControllerConfig,
    sim: &SimConfig,
) -> Result<EpisodeTrace, SimError> {
    sim.validate()?;
    controller
        .validate()
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    if !corridor.contains(&start) || hit_wall(corridor, &start, sim) || start.z >= corridor.length - sim.end_margin {
        return Err(SimError::InvalidInitialPose(start));
    }

    let period = sim.period_ticks();
    let latency = sim.latency_ticks();
    let max_ticks = (sim.max_time / sim.dt).ceil() as u64;
    let mut disturbance = Disturbance::new(sim.wind);
    let mut state = ControllerState::default();
    let mut queue: VecDeque<Pending> = VecDeque::new();
    let mut command = ControlCommand::Hover;
    let mut pose = start;
    let mut ticks = Vec::new();
    let mut seq = 0u64;

    for tick in 0..max_ticks {
        let t = tick as f64 * sim.dt;
        if tick % period == 0 {
            let capture = Capture { seq, t, corridor, pose };
            let angle = estimator
                .angle(&capture)
                .map_err(|source| SimError::Estimator { t, source })?;
            queue.push_back(Pending {
                seq,
                capture_t: t,
                pose,
                angle,
                apply_tick: tick + latency,
            });
            seq += 1;
            disturbance.resample();
        }
        let mut applied = None;
        while queue.front().is_some_and(|p| p.apply_tick == tick) {
            let p = queue.pop_front().expect("checked front");
            let capture = Capture {
                seq: p.seq,
                t: p.capture_t,
                corridor,
                pose: p.pose,
            };
            let mut distance = None;
            let mut failure = None;
            command = decide(
                p.angle,
                || match estimator.distance(&capture) {
                    Ok(d) => {
                        distance = Some(d);
                        d
                    }
                    Err(e) => {
                        failure = Some(e);
                        0.5
                    }
                },
                &mut state,
                p.capture_t,
                controller,
            );
            if let Some(source) = failure {
                return Err(SimError::Estimator { t, source });
            }
            applied = Some(AppliedEstimate {
                capture_seq: p.seq,
                capture_t: p.capture_t,
                angle: p.angle,
                distance,
            });
        }
        ticks.push(TraceTick {
            tick,
            t,
            pose,
            estimate: applied,
            command,
        });
        if command == ControlCommand::Land {
            return Ok(finish(corridor, ticks, Outcome::Landed, t, pose));
        }
        pose = step(&pose, command, sim, disturbance.lateral_gust);
        let t_next = (tick + 1) as f64 * sim.dt;
        if hit_wall(corridor, &pose, sim) {
            return Ok(finish(corridor, ticks, Outcome::WallCollision, t_next, pose));
        }
        if pose.z >= corridor.length - sim.end_margin {
            return Ok(finish(corridor, ticks, Outcome::EndReached, t_next, pose));
        }
    }
    let end_t = max_ticks as f64 * sim.dt;
    Ok(finish(corridor, ticks, Outcome::Timeout, end_t, pose))
}

fn finish(corridor: &CorridorSpec, ticks: Vec<TraceTick>, outcome: Outcome, end_t: f64, pose: Pose) -> EpisodeTrace {
    EpisodeTrace {
        corridor: *corridor,
        ticks,
        outcome,
        end_t,
        final_pose: pose,
    }
}
