//! Per-tick orchestration: the phase state machine
//! (Dispersing -> WaitingNeighbors -> Averaging -> CBPT), the CBPT motion
//! controller, and the scenario runners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    sense_neighbors, step_kinematics, AgentSnapshot, AgentState, Motion, MotionParams,
    NeighborReading, Phase,
};
use crate::consensus::{degroot_update, ConsensusParams};
use crate::dispersion::{diffusion_step, dispersion_step, DispersionParams};
use crate::error::{Result, SimError};
use crate::field::{ReferenceRegion, ScalarField};
use crate::geom::Vec2;
use crate::metrics::{
    accuracy_errors, coverage_area, positions_to_estimates, robots_in_region, MetricsRecord,
};
use crate::network::{build_proximity_graph, giant_component_size, mean_degree, ProximityGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbptParams {
    /// Improvement tolerance on the objective |s - z|.
    pub tolerance: f64,
    /// Ticks without improvement before the turn preference flips.
    pub patience_limit: u32,
    /// Objective band within which the robot stops.
    pub stop_band: f64,
    /// Length of a turn burst after a preference flip, ticks.
    pub turn_burst: u32,
}

impl Default for CbptParams {
    fn default() -> Self {
        CbptParams {
            tolerance: 0.0,
            patience_limit: 5,
            stop_band: 0.0,
            turn_burst: 3,
        }
    }
}

/// Improvement-memory run-and-turn controller realizing sample-based descent
/// of the objective without gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbptController {
    pub best: f64,
    pub prev: f64,
    /// Exponentially smoothed objective; NaN until the first observation.
    pub smoothed: f64,
    /// Latched once the smoothed objective enters the stop band.
    pub stopped: bool,
    pub prefer_left: bool,
    pub patience: u32,
    pub burst_remaining: u32,
}

impl Default for CbptController {
    fn default() -> Self {
        CbptController {
            best: f64::INFINITY,
            prev: f64::INFINITY,
            smoothed: f64::NAN,
            stopped: false,
            prefer_left: true,
            patience: 0,
            burst_remaining: 0,
        }
    }
}

/// EMA weight applied to each new objective sample before any decision.
const OBJECTIVE_EMA: f64 = 0.35;
/// A latched stop releases only once the smoothed objective exceeds
/// `RESUME_FACTOR * stop_band` (debounce against sensor noise).
const RESUME_FACTOR: f64 = 2.0;

/// One CBPT decision for objective `o = |s - z|`. Turn bursts have random
/// length in `[2, 2 * turn_burst]` ticks so consecutive reorientations do not
/// cancel into a straight escape path.
pub fn cbpt_step<R: Rng + ?Sized>(
    ctrl: &mut CbptController,
    objective: f64,
    params: &CbptParams,
    rng: &mut R,
) -> Motion {
    debug_assert!(objective >= 0.0);
    // The stop latch works on a smoothed objective so sensor noise cannot
    // shake a settled robot loose; steering below uses the raw value.
    let smoothed = if ctrl.smoothed.is_finite() {
        OBJECTIVE_EMA * objective + (1.0 - OBJECTIVE_EMA) * ctrl.smoothed
    } else {
        objective
    };
    ctrl.smoothed = smoothed;
    if ctrl.stopped {
        if smoothed <= RESUME_FACTOR * params.stop_band {
            return Motion::Stop;
        }
        ctrl.stopped = false;
        ctrl.best = objective;
        ctrl.prev = objective;
        ctrl.patience = 0;
    }
    if smoothed <= params.stop_band {
        ctrl.stopped = true;
        ctrl.best = objective;
        ctrl.prev = objective;
        ctrl.patience = 0;
        ctrl.burst_remaining = 0;
        return Motion::Stop;
    }
    if ctrl.burst_remaining > 0 {
        ctrl.burst_remaining -= 1;
        return if ctrl.prefer_left {
            Motion::TurnLeft
        } else {
            Motion::TurnRight
        };
    }
    if objective < ctrl.best - params.tolerance {
        ctrl.best = objective;
        ctrl.prev = objective;
        ctrl.patience = 0;
        return Motion::Forward;
    }
    // worsening monotonically burns patience twice as fast as merely stalling
    ctrl.patience += if objective > ctrl.prev + params.tolerance {
        2
    } else {
        1
    };
    ctrl.prev = objective;
    if ctrl.patience >= params.patience_limit {
        ctrl.prefer_left = !ctrl.prefer_left;
        ctrl.patience = 0;
        ctrl.best = objective;
        let burst = rng.random_range(2..=(2 * params.turn_burst.max(1)));
        ctrl.burst_remaining = burst.saturating_sub(1);
        if ctrl.prefer_left {
            Motion::TurnLeft
        } else {
            Motion::TurnRight
        }
    } else {
        Motion::Forward
    }
}

/// Incremental mean: `(mean * count + sample) / (count + 1)`.
pub fn running_mean_update(mean: f64, count: u64, sample: f64) -> f64 {
    (mean * count as f64 + sample) / (count as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// Dispersion, then local averaging, then consensus-based phototaxis.
    Full,
    /// Exploration only, with the connectivity-preserving walk.
    DisperseOnly,
    /// Exploration only, with the diffusion baseline.
    DiffuseOnly,
    /// No communication: diffusion with a running sample mean, then CBPT
    /// after `t_sw` samples.
    Control { t_sw: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n: usize,
    pub field: ScalarField,
    pub region: ReferenceRegion,
    pub mode: ScenarioMode,
    pub r_comm: f64,
    pub r_cover: f64,
    pub raster_cell: f64,
    pub motion: MotionParams,
    pub dispersion: DispersionParams,
    pub consensus: ConsensusParams,
    pub cbpt: CbptParams,
    /// Additive Gaussian sensor noise on field samples.
    pub sensor_noise_sd: f64,
    /// Multiplicative Gaussian noise fraction on distance estimates.
    pub range_noise_fraction: f64,
    /// Quadrature resolution for the ground-truth mean.
    pub gt_resolution: f64,
    /// Radius of the dense initial disk around the field center.
    pub initial_radius: f64,
    /// Ticks after which a waiting (or isolated) agent proceeds to averaging.
    pub wait_timeout: u32,
    /// Ticks between survey samples in the communication-free control
    /// scenario; `t_sw` counts samples, so exploration lasts `t_sw` periods.
    pub sample_period: u32,
    pub total_ticks: u32,
    /// Keep the first measurement instead of resampling during averaging.
    pub freeze_measurements: bool,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SimError::config("n", "must be at least 1"));
        }
        if self.r_comm <= 0.0 {
            return Err(SimError::config("r_comm", "must be positive"));
        }
        if self.r_cover <= 0.0 {
            return Err(SimError::config("r_cover", "must be positive"));
        }
        if self.raster_cell <= 0.0 || self.raster_cell > self.r_cover / 5.0 {
            return Err(SimError::config(
                "raster_cell",
                "must be positive and at most r_cover / 5",
            ));
        }
        if self.sensor_noise_sd < 0.0 {
            return Err(SimError::config("sensor_noise_sd", "must be nonnegative"));
        }
        if self.range_noise_fraction < 0.0 {
            return Err(SimError::config("range_noise_fraction", "must be nonnegative"));
        }
        if self.initial_radius <= 0.0 {
            return Err(SimError::config("initial_radius", "must be positive"));
        }
        if let ScenarioMode::Control { t_sw } = self.mode {
            if t_sw < 1 {
                return Err(SimError::config("t_sw", "must be at least 1"));
            }
        }
        if self.sample_period < 1 {
            return Err(SimError::config("sample_period", "must be at least 1"));
        }
        self.motion.validate()?;
        self.dispersion
            .validate(self.r_comm, self.motion.speed * self.motion.dt)?;
        self.consensus.validate()?;
        self.region.validate()?;
        Ok(())
    }

    fn field_center(&self) -> Vec2 {
        match self.field {
            ScalarField::RadialCone { center, .. } | ScalarField::VShapeRamp { center, .. } => {
                center
            }
            ScalarField::Grid(ref g) => Vec2::new(
                g.origin.x + (g.cols as f64 - 1.0) * g.cell_cm / 2.0,
                g.origin.y + (g.rows as f64 - 1.0) * g.cell_cm / 2.0,
            ),
        }
    }
}

/// One row per (tick, agent) of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub phase: Phase,
    pub estimate: f64,
}

#[derive(Debug)]
pub struct World {
    pub params: ScenarioParams,
    pub agents: Vec<AgentState>,
    pub graph: ProximityGraph,
    pub tick: u64,
    /// Ground-truth field mean over the reference region, intensity units.
    pub ground_truth: f64,
    /// Ground truth mapped to the contour coordinate, when supported.
    pub contour_ground_truth: Option<f64>,
    /// Consecutive ticks each agent has spent with no neighbor in range.
    isolated_ticks: Vec<u32>,
    frozen_samples: Vec<f64>,
}

impl World {
    /// Builds the initial world: agents uniform in a dense disk at the field
    /// center with random headings, one RNG stream per agent.
    pub fn new(params: ScenarioParams, seed: u64) -> Result<World> {
        params.validate()?;
        let center = params.field_center();
        let mut placement_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agents = Vec::with_capacity(params.n);
        for id in 0..params.n {
            let r = params.initial_radius * placement_rng.random::<f64>().sqrt();
            let theta = placement_rng.random::<f64>() * std::f64::consts::TAU;
            let heading = placement_rng.random::<f64>() * std::f64::consts::TAU;
            let pos = center + Vec2::new(r * theta.cos(), r * theta.sin());
            let mut stream = ChaCha8Rng::seed_from_u64(seed);
            stream.set_stream(id as u64 + 1);
            let mut agent = AgentState::new(id, pos, heading, stream);
            if let ScenarioMode::Control { .. } = params.mode {
                // control robots start in diffusion immediately; estimate is a
                // running mean seeded by their first sample below
                agent.phase = Phase::Dispersing;
            }
            agents.push(agent);
        }
        let positions: Vec<Vec2> = agents.iter().map(|a| a.position).collect();
        let graph = build_proximity_graph(&positions, params.r_comm);
        let ground_truth = params
            .field
            .ground_truth_mean(&params.region, params.gt_resolution)?;
        let contour_ground_truth = params.field.contour_of_intensity(ground_truth).ok();
        let n = params.n;
        Ok(World {
            params,
            agents,
            graph,
            tick: 0,
            ground_truth,
            contour_ground_truth,
            isolated_ticks: vec![0; n],
            frozen_samples: vec![f64::NAN; n],
        })
    }

    fn snapshots(&self) -> Vec<AgentSnapshot> {
        self.agents
            .iter()
            .map(|a| AgentSnapshot {
                position: a.position,
                estimate: a.estimate,
                dispersion_done: a.dispersion_done(),
                estimating: a.estimating(),
            })
            .collect()
    }

    /// One synchronous tick: sense, per-phase controller, kinematics, graph
    /// rebuild, metrics.
    pub fn advance_tick(&mut self) -> Result<MetricsRecord> {
        let snapshots = self.snapshots();
        let mode = self.params.mode;
        for idx in 0..self.agents.len() {
            let readings = {
                let agent = &mut self.agents[idx];
                sense_neighbors(
                    idx,
                    &snapshots,
                    self.params.r_comm,
                    self.params.range_noise_fraction,
                    &mut agent.rng,
                )
            };
            match mode {
                ScenarioMode::Full => self.collective_controller(idx, &readings)?,
                ScenarioMode::DisperseOnly => {
                    let agent = &mut self.agents[idx];
                    let (motion, done) = dispersion_step(
                        agent.phase,
                        &mut agent.walk,
                        &readings,
                        &self.params.dispersion,
                        &mut agent.rng,
                    );
                    agent.motion = motion;
                    agent.phase = if done {
                        Phase::WaitingNeighbors
                    } else {
                        Phase::Dispersing
                    };
                }
                ScenarioMode::DiffuseOnly => {
                    let agent = &mut self.agents[idx];
                    agent.motion =
                        diffusion_step(&mut agent.walk, &self.params.dispersion, &mut agent.rng);
                }
                ScenarioMode::Control { t_sw } => self.control_controller(idx, t_sw)?,
            }
        }
        for agent in &mut self.agents {
            step_kinematics(agent, &self.params.motion);
        }
        let positions: Vec<Vec2> = self.agents.iter().map(|a| a.position).collect();
        self.graph = build_proximity_graph(&positions, self.params.r_comm);
        self.tick += 1;
        self.record_metrics(&positions)
    }

    /// Phase machine of the full scenario for one agent.
    fn collective_controller(&mut self, idx: usize, readings: &[NeighborReading]) -> Result<()> {
        let params = &self.params;
        let agent = &mut self.agents[idx];
        if readings.is_empty() {
            self.isolated_ticks[idx] += 1;
        } else {
            self.isolated_ticks[idx] = 0;
        }
        match agent.phase {
            Phase::Dispersing => {
                let (motion, done) = dispersion_step(
                    agent.phase,
                    &mut agent.walk,
                    readings,
                    &params.dispersion,
                    &mut agent.rng,
                );
                agent.motion = motion;
                if done {
                    agent.phase = Phase::WaitingNeighbors;
                    agent.wait_ticks = 0;
                } else if self.isolated_ticks[idx] > params.wait_timeout {
                    // nobody in range for a long time: stop waiting for links
                    // that will never come and start averaging alone
                    Self::enter_averaging(agent, params)?;
                }
            }
            Phase::WaitingNeighbors => {
                let (motion, still_done) = dispersion_step(
                    agent.phase,
                    &mut agent.walk,
                    readings,
                    &params.dispersion,
                    &mut agent.rng,
                );
                agent.motion = motion;
                if !still_done && !readings.is_empty() {
                    agent.phase = Phase::Dispersing;
                } else {
                    agent.wait_ticks += 1;
                    let quorum = readings.iter().all(|r| r.neighbor_done);
                    if quorum || agent.wait_ticks > params.wait_timeout {
                        Self::enter_averaging(agent, params)?;
                    }
                }
            }
            Phase::Averaging => {
                agent.motion = Motion::Stop;
                let s = if params.freeze_measurements {
                    self.frozen_samples[idx]
                } else {
                    params
                        .field
                        .sample(agent.position, params.sensor_noise_sd, &mut agent.rng)?
                };
                let neighbor_estimates: Vec<f64> = readings
                    .iter()
                    .filter(|r| r.neighbor_estimating)
                    .map(|r| r.neighbor_estimate)
                    .collect();
                agent.estimate =
                    degroot_update(agent.estimate, s, &neighbor_estimates, params.consensus.alpha);
                agent.sample_count += 1;
                agent.averaging_ticks += 1;
                if agent.averaging_ticks >= params.consensus.t_comm {
                    agent.phase = Phase::Cbpt;
                    agent.cbpt = CbptController::default();
                    // the measurement carried into on-the-go averaging stays
                    // the one from the surveyed position
                    agent.consensus_sample = s;
                }
            }
            Phase::Cbpt => {
                let s = params
                    .field
                    .sample(agent.position, params.sensor_noise_sd, &mut agent.rng)?;
                // keep finding a consensus on the go with whoever is in range;
                // the averaging input is the dispersed-position measurement,
                // only the phototaxis objective tracks the live sample
                let neighbor_estimates: Vec<f64> = readings
                    .iter()
                    .filter(|r| r.neighbor_estimating)
                    .map(|r| r.neighbor_estimate)
                    .collect();
                agent.estimate = degroot_update(
                    agent.estimate,
                    agent.consensus_sample,
                    &neighbor_estimates,
                    params.consensus.alpha,
                );
                agent.sample_count += 1;
                let objective = (s - agent.estimate).abs();
                agent.motion = cbpt_step(&mut agent.cbpt, objective, &params.cbpt, &mut agent.rng);
            }
            Phase::Stopped => {
                agent.motion = Motion::Stop;
            }
        }
        Ok(())
    }

    fn enter_averaging(agent: &mut AgentState, params: &ScenarioParams) -> Result<()> {
        agent.phase = Phase::Averaging;
        agent.averaging_ticks = 0;
        agent.motion = Motion::Stop;
        // initial estimate: first noiseless measurement
        agent.estimate = params.field.value(agent.position);
        Ok(())
    }

    /// Communication-free baseline for one agent.
    fn control_controller(&mut self, idx: usize, t_sw: u64) -> Result<()> {
        let params = &self.params;
        let agent = &mut self.agents[idx];
        match agent.phase {
            Phase::Dispersing => {
                if self.tick % params.sample_period as u64 == 0 {
                    let s = params
                        .field
                        .sample(agent.position, params.sensor_noise_sd, &mut agent.rng)?;
                    agent.estimate = running_mean_update(agent.estimate, agent.sample_count, s);
                    agent.sample_count += 1;
                }
                if agent.sample_count >= t_sw {
                    agent.phase = Phase::Cbpt;
                    agent.cbpt = CbptController::default();
                    agent.motion = Motion::Stop;
                } else {
                    agent.motion =
                        diffusion_step(&mut agent.walk, &params.dispersion, &mut agent.rng);
                }
            }
            Phase::Cbpt => {
                let s = params
                    .field
                    .sample(agent.position, params.sensor_noise_sd, &mut agent.rng)?;
                let objective = (s - agent.estimate).abs();
                agent.motion = cbpt_step(&mut agent.cbpt, objective, &params.cbpt, &mut agent.rng);
            }
            _ => {
                agent.motion = Motion::Stop;
            }
        }
        Ok(())
    }

    /// Stores first frozen measurements; call after construction when
    /// `freeze_measurements` is set.
    pub fn freeze_initial_samples(&mut self) -> Result<()> {
        for idx in 0..self.agents.len() {
            let pos = self.agents[idx].position;
            let sd = self.params.sensor_noise_sd;
            let s = {
                let agent = &mut self.agents[idx];
                self.params.field.sample(pos, sd, &mut agent.rng)?
            };
            self.frozen_samples[idx] = s;
        }
        Ok(())
    }

    pub fn record_metrics(&self, positions: &[Vec2]) -> Result<MetricsRecord> {
        let params = &self.params;
        let (pos_t, pos_p, pos_a) = if params.field.supports_contour() {
            let est = positions_to_estimates(positions, &params.field)?;
            let gt = self.contour_ground_truth.unwrap_or(0.0);
            accuracy_errors(&est, gt)?
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        let estimates: Vec<f64> = self.agents.iter().map(|a| a.estimate).collect();
        let (est_t, est_p, est_a) = accuracy_errors(&estimates, self.ground_truth)?;
        Ok(MetricsRecord {
            t: self.tick as f64 * params.motion.dt,
            coverage_cm2: coverage_area(positions, params.r_cover, params.raster_cell),
            mean_degree: mean_degree(&self.graph),
            giant_component: giant_component_size(&self.graph),
            trueness_error: pos_t,
            precision_error: pos_p,
            accuracy_error: pos_a,
            est_trueness_error: est_t,
            est_precision_error: est_p,
            est_accuracy_error: est_a,
            robots_in_region: robots_in_region(positions, &params.region),
        })
    }

    pub fn initial_metrics(&self) -> Result<MetricsRecord> {
        let positions: Vec<Vec2> = self.agents.iter().map(|a| a.position).collect();
        self.record_metrics(&positions)
    }

    pub fn trajectory_rows(&self) -> Vec<TrajectoryRow> {
        self.agents
            .iter()
            .map(|a| TrajectoryRow {
                tick: self.tick,
                agent: a.id,
                x: a.position.x,
                y: a.position.y,
                heading: a.heading,
                phase: a.phase,
                estimate: a.estimate,
            })
            .collect()
    }
}

/// Full run of a scenario: `total_ticks` synchronous ticks from the dense
/// initial cluster. Returns per-tick metrics (including tick 0) and the
/// trajectory log. Deterministic per (params, seed).
pub fn run_scenario(
    params: &ScenarioParams,
    seed: u64,
    log_trajectory: bool,
) -> Result<(Vec<MetricsRecord>, Vec<TrajectoryRow>)> {
    let mut world = World::new(params.clone(), seed)?;
    if params.freeze_measurements {
        world.freeze_initial_samples()?;
    }
    let mut metrics = Vec::with_capacity(params.total_ticks as usize + 1);
    let mut trajectory = Vec::new();
    metrics.push(world.initial_metrics()?);
    if log_trajectory {
        trajectory.extend(world.trajectory_rows());
    }
    for _ in 0..params.total_ticks {
        metrics.push(world.advance_tick()?);
        if log_trajectory {
            trajectory.extend(world.trajectory_rows());
        }
    }
    Ok((metrics, trajectory))
}
