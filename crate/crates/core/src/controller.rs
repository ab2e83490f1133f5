//! Bang-bang centering controller: translational correction first, then
//! heading, with a landing timer for sustained out-of-bound readings.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack absorbing tick-accumulation error when comparing elapsed time
/// against `land_after`.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlCommand {
    PitchForward,
    RollLeft,
    RollRight,
    YawLeft,
    YawRight,
    Hover,
    Land,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid controller config: {0}")]
pub struct ConfigError(String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Half-width of the band around pi/2 treated as centered, radians.
    pub delta_angle: f64,
    /// Half-width of the band around 0.5 treated as aligned.
    pub delta_dist: f64,
    /// Angles outside `[lo, hi]` count as out of bound.
    pub angle_bounds: (f64, f64),
    /// Seconds of continuous out-of-bound readings before landing.
    pub land_after: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            delta_angle: 5f64.to_radians(),
            delta_dist: 0.05,
            angle_bounds: (20f64.to_radians(), 160f64.to_radians()),
            land_after: 1.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi) = self.angle_bounds;
        if !(self.delta_angle > 0.0 && self.delta_angle < FRAC_PI_2) {
            return Err(ConfigError(format!(
                "delta_angle {} outside (0, pi/2)",
                self.delta_angle
            )));
        }
        if !(self.delta_dist > 0.0 && self.delta_dist < 0.5) {
            return Err(ConfigError(format!("delta_dist {} outside (0, 0.5)", self.delta_dist)));
        }
        if !(lo < FRAC_PI_2 && FRAC_PI_2 < hi) {
            return Err(ConfigError(format!("angle bounds ({lo}, {hi}) must straddle pi/2")));
        }
        if !(self.land_after > 0.0) {
            return Err(ConfigError("land_after must be positive".into()));
        }
        Ok(())
    }

    pub fn in_bounds(&self, angle: f64) -> bool {
        (self.angle_bounds.0..=self.angle_bounds.1).contains(&angle)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub out_of_bound_since: Option<f64>,
}

impl ControllerState {
    pub fn reset(&mut self) {
        self.out_of_bound_since = None;
    }
}

/// One pass of the decision rule. `distance` is only called when the angle
/// is inside the centered band. Never returns [`ControlCommand::Hover`].
pub fn decide(
    angle: f64,
    distance: impl FnOnce() -> f64,
    state: &mut ControllerState,
    now: f64,
    config: &ControllerConfig,
) -> ControlCommand {
    if config.in_bounds(angle) {
        state.out_of_bound_since = None;
    } else {
        let since = *state.out_of_bound_since.get_or_insert(now);
        if now - since + TIME_EPS >= config.land_after {
            return ControlCommand::Land;
        }
    }
    if (angle - FRAC_PI_2).abs() <= config.delta_angle {
        let d = distance();
        if (d - 0.5).abs() <= config.delta_dist {
            ControlCommand::PitchForward
        } else if d < 0.5 {
            ControlCommand::YawLeft
        } else {
            ControlCommand::YawRight
        }
    } else if angle < FRAC_PI_2 {
        ControlCommand::RollRight
    } else {
        ControlCommand::RollLeft
    }
}
