//! Agent state, differential-drive-like kinematics, and noisy
//! neighbor-distance sensing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::CbptController;
use crate::geom::Vec2;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Motion {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

/// Lifecycle of an agent through the exploration/exploitation scenario.
/// Transitions only along Dispersing <-> WaitingNeighbors -> Averaging -> Cbpt;
/// Stopped is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Dispersing,
    WaitingNeighbors,
    Averaging,
    Cbpt,
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Forward speed, cm/s.
    pub speed: f64,
    /// Turn rate, rad/s.
    pub turn_rate: f64,
    /// Tick length, s.
    pub dt: f64,
    /// Heading noise added after each forward step, rad.
    pub heading_noise_sd: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            speed: 1.0,
            turn_rate: std::f64::consts::FRAC_PI_4,
            dt: 1.0,
            heading_noise_sd: 0.05,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.speed <= 0.0 {
            return Err(crate::error::SimError::config("speed", "must be positive"));
        }
        if self.turn_rate <= 0.0 {
            return Err(crate::error::SimError::config("turn_rate", "must be positive"));
        }
        if self.dt <= 0.0 {
            return Err(crate::error::SimError::config("dt", "must be positive"));
        }
        if self.heading_noise_sd < 0.0 {
            return Err(crate::error::SimError::config(
                "heading_noise_sd",
                "must be nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborReading {
    pub neighbor_id: usize,
    /// IR-ranging style distance estimate, cm; always positive.
    pub estimated_distance: f64,
    /// Neighbor's broadcast estimate; meaningful during averaging/CBPT.
    pub neighbor_estimate: f64,
    /// Whether the neighbor reports its dispersion as finished.
    pub neighbor_done: bool,
    /// Whether the neighbor is broadcasting an estimate at all; robots still
    /// dispersing have nothing to share and must not enter the averaging sum.
    pub neighbor_estimating: bool,
}

/// Run-and-tumble bookkeeping for the random walk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WalkState {
    pub ticks_since_tumble: u32,
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec2,
    /// Heading in [0, 2pi).
    pub heading: f64,
    /// Current estimate of the field mean.
    pub estimate: f64,
    /// Measurement fed into the averaging update; fixed at the position where
    /// the robot finished dispersing so later motion cannot bias the
    /// environmental estimate toward wherever the swarm ends up.
    pub consensus_sample: f64,
    pub sample_count: u64,
    pub phase: Phase,
    pub motion: Motion,
    pub walk: WalkState,
    pub cbpt: CbptController,
    /// Ticks spent in WaitingNeighbors since last entering it.
    pub wait_ticks: u32,
    /// Averaging iterations completed.
    pub averaging_ticks: u32,
    pub rng: ChaCha8Rng,
}

impl AgentState {
    pub fn new(id: usize, position: Vec2, heading: f64, rng: ChaCha8Rng) -> Self {
        AgentState {
            id,
            position,
            heading: wrap_angle(heading),
            estimate: 0.0,
            consensus_sample: f64::NAN,
            sample_count: 0,
            phase: Phase::Dispersing,
            motion: Motion::Stop,
            walk: WalkState::default(),
            cbpt: CbptController::default(),
            wait_ticks: 0,
            averaging_ticks: 0,
            rng,
        }
    }

    /// Done with dispersion, from the point of view of neighbors.
    pub fn dispersion_done(&self) -> bool {
        self.phase != Phase::Dispersing
    }

    /// Holds an estimate worth broadcasting.
    pub fn estimating(&self) -> bool {
        self.phase >= Phase::Averaging
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta % TAU;
    if t < 0.0 {
        t + TAU
    } else {
        t
    }
}

/// Applies the agent's current motion command for one tick.
pub fn step_kinematics(agent: &mut AgentState, params: &MotionParams) {
    match agent.motion {
        Motion::Stop => {}
        Motion::Forward => {
            let step = params.speed * params.dt;
            agent.position = agent.position
                + Vec2::new(step * agent.heading.cos(), step * agent.heading.sin());
            if params.heading_noise_sd > 0.0 {
                let noise = Normal::new(0.0, params.heading_noise_sd).unwrap();
                agent.heading = wrap_angle(agent.heading + noise.sample(&mut agent.rng));
            }
        }
        Motion::TurnLeft => {
            agent.heading = wrap_angle(agent.heading + params.turn_rate * params.dt);
        }
        Motion::TurnRight => {
            agent.heading = wrap_angle(agent.heading - params.turn_rate * params.dt);
        }
    }
}

/// Snapshot of the per-agent quantities other robots can observe.
#[derive(Debug, Clone, Copy)]
pub struct AgentSnapshot {
    pub position: Vec2,
    pub estimate: f64,
    pub dispersion_done: bool,
    pub estimating: bool,
}

/// Returns one reading per other agent whose true distance is within
/// `r_comm` (inclusive). Estimated distance is `d * (1 + eps)` with
/// `eps ~ N(0, fraction)`, clamped positive.
pub fn sense_neighbors<R: Rng + ?Sized>(
    self_id: usize,
    snapshots: &[AgentSnapshot],
    r_comm: f64,
    range_noise_fraction: f64,
    rng: &mut R,
) -> Vec<NeighborReading> {
    debug_assert!(r_comm > 0.0 && range_noise_fraction >= 0.0);
    let me = snapshots[self_id].position;
    let mut readings = Vec::new();
    for (j, snap) in snapshots.iter().enumerate() {
        if j == self_id {
            continue;
        }
        let d = me.distance(snap.position);
        if d > r_comm {
            continue;
        }
        let est = if range_noise_fraction > 0.0 {
            let normal = Normal::new(0.0, range_noise_fraction).unwrap();
            (d * (1.0 + normal.sample(rng))).max(1e-9)
        } else {
            d
        };
        readings.push(NeighborReading {
            neighbor_id: j,
            estimated_distance: est.max(1e-9),
            neighbor_estimate: snap.estimate,
            neighbor_done: snap.dispersion_done,
            neighbor_estimating: snap.estimating,
        });
    }
    readings
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn agent_at(pos: Vec2, heading: f64) -> AgentState {
        AgentState::new(0, pos, heading, ChaCha8Rng::seed_from_u64(1))
    }

    fn noiseless() -> MotionParams {
        MotionParams {
            heading_noise_sd: 0.0,
            ..MotionParams::default()
        }
    }

    #[test]
    fn stop_leaves_pose_unchanged() {
        let mut a = agent_at(Vec2::new(2.0, 3.0), 1.0);
        a.motion = Motion::Stop;
        step_kinematics(&mut a, &MotionParams::default());
        assert_eq!(a.position, Vec2::new(2.0, 3.0));
        assert_eq!(a.heading, 1.0);
    }

    #[test]
    fn forward_unit_advance() {
        let mut a = agent_at(Vec2::ZERO, 0.0);
        a.motion = Motion::Forward;
        step_kinematics(&mut a, &noiseless());
        assert_relative_eq!(a.position.x, 1.0);
        assert_relative_eq!(a.position.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn turn_left_quarter() {
        let mut a = agent_at(Vec2::ZERO, 0.0);
        a.motion = Motion::TurnLeft;
        let params = MotionParams {
            turn_rate: std::f64::consts::FRAC_PI_2,
            ..noiseless()
        };
        step_kinematics(&mut a, &params);
        assert_relative_eq!(a.heading, std::f64::consts::FRAC_PI_2);
        assert_eq!(a.position, Vec2::ZERO);
    }

    #[test]
    fn heading_stays_wrapped() {
        let mut a = agent_at(Vec2::ZERO, 6.2);
        a.motion = Motion::TurnLeft;
        let params = MotionParams {
            turn_rate: 1.0,
            ..noiseless()
        };
        for _ in 0..100 {
            step_kinematics(&mut a, &params);
            assert!((0.0..TAU).contains(&a.heading));
        }
    }

    fn snaps(positions: &[Vec2]) -> Vec<AgentSnapshot> {
        positions
            .iter()
            .map(|&p| AgentSnapshot {
                position: p,
                estimate: 0.0,
                dispersion_done: false,
                estimating: false,
            })
            .collect()
    }

    #[test]
    fn sense_noiseless_exact_distance() {
        let s = snaps(&[Vec2::ZERO, Vec2::new(5.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let readings = sense_neighbors(0, &s, 10.0, 0.0, &mut rng);
        assert_eq!(readings.len(), 1);
        assert_relative_eq!(readings[0].estimated_distance, 5.0);
    }

    #[test]
    fn sense_out_of_range_invisible() {
        let s = snaps(&[Vec2::ZERO, Vec2::new(10.1, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sense_neighbors(0, &s, 10.0, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn sense_boundary_inclusive() {
        let s = snaps(&[Vec2::ZERO, Vec2::new(10.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sense_neighbors(0, &s, 10.0, 0.0, &mut rng).len(), 1);
    }

    #[test]
    fn sense_membership_symmetric() {
        let s = snaps(&[Vec2::ZERO, Vec2::new(3.0, 4.0), Vec2::new(40.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i == j {
                    continue;
                }
                let i_sees_j = sense_neighbors(i, &s, 10.0, 0.0, &mut rng)
                    .iter()
                    .any(|r| r.neighbor_id == j);
                let j_sees_i = sense_neighbors(j, &s, 10.0, 0.0, &mut rng)
                    .iter()
                    .any(|r| r.neighbor_id == i);
                assert_eq!(i_sees_j, j_sees_i);
            }
        }
    }
}
