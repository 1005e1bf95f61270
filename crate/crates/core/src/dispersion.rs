//! Exploration-phase controllers: the connectivity-preserving
//! threshold-conditional random walk and the pure-diffusion baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Motion, NeighborReading, Phase, WalkState};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    /// Nearest-neighbor distance at which a robot stops walking, cm.
    pub distance_threshold: f64,
    /// A waiting robot resumes when the nearest neighbor drops below
    /// `distance_threshold - resume_hysteresis`.
    pub resume_hysteresis: f64,
    /// Minimum straight run before a tumble may occur, ticks.
    pub straight_run: u32,
    /// Per-tick tumble probability once the straight run has elapsed.
    pub tumble_probability: f64,
}

impl Default for DispersionParams {
    fn default() -> Self {
        DispersionParams {
            distance_threshold: 7.0,
            resume_hysteresis: 7.0,
            straight_run: 0,
            tumble_probability: 0.5,
        }
    }
}

impl DispersionParams {
    /// `forward_step` is the distance covered in one tick; a stopping agent
    /// must not be able to overshoot the communication range.
    pub fn validate(&self, r_comm: f64, forward_step: f64) -> Result<()> {
        if !(self.distance_threshold > 0.0 && self.distance_threshold < r_comm) {
            return Err(SimError::config(
                "distance_threshold",
                format!("must lie in (0, r_comm = {r_comm})"),
            ));
        }
        if self.resume_hysteresis < 0.0 {
            return Err(SimError::config("resume_hysteresis", "must be nonnegative"));
        }
        if self.distance_threshold + forward_step > r_comm {
            return Err(SimError::config(
                "distance_threshold",
                format!(
                    "threshold + per-tick step ({}) must not exceed r_comm = {r_comm}",
                    self.distance_threshold + forward_step
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.tumble_probability) {
            return Err(SimError::config("tumble_probability", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// One run-and-tumble step: straight runs of at least `straight_run` ticks,
/// then geometric-length continuation with a random turn on tumble ticks.
pub fn run_tumble<R: Rng + ?Sized>(
    walk: &mut WalkState,
    params: &DispersionParams,
    rng: &mut R,
) -> Motion {
    if walk.ticks_since_tumble >= params.straight_run
        && rng.random::<f64>() < params.tumble_probability
    {
        walk.ticks_since_tumble = 0;
        if rng.random::<bool>() {
            Motion::TurnLeft
        } else {
            Motion::TurnRight
        }
    } else {
        walk.ticks_since_tumble += 1;
        Motion::Forward
    }
}

/// Threshold-conditional random walk. Returns the motion command and whether
/// the agent considers its dispersion finished this tick.
///
/// An isolated agent always stops, never finished: wandering off with no
/// neighbors in range would lose it for good.
pub fn dispersion_step<R: Rng + ?Sized>(
    phase: Phase,
    walk: &mut WalkState,
    readings: &[NeighborReading],
    params: &DispersionParams,
    rng: &mut R,
) -> (Motion, bool) {
    debug_assert!(matches!(phase, Phase::Dispersing | Phase::WaitingNeighbors));
    let d_min = readings
        .iter()
        .map(|r| r.estimated_distance)
        .fold(f64::INFINITY, f64::min);
    if readings.is_empty() {
        return (Motion::Stop, false);
    }
    if phase == Phase::WaitingNeighbors {
        // Hysteresis band: resume walking only on a clear violation.
        if d_min < params.distance_threshold - params.resume_hysteresis {
            (run_tumble(walk, params, rng), false)
        } else {
            (Motion::Stop, true)
        }
    } else if d_min >= params.distance_threshold {
        (Motion::Stop, true)
    } else {
        (run_tumble(walk, params, rng), false)
    }
}

/// Diffusion baseline: unconditional run-and-tumble, neighbors ignored.
pub fn diffusion_step<R: Rng + ?Sized>(
    walk: &mut WalkState,
    params: &DispersionParams,
    rng: &mut R,
) -> Motion {
    run_tumble(walk, params, rng)
}
