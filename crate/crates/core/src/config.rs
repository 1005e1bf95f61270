//! Experiment configuration: scenario selection plus every numeric parameter,
//! loadable from a TOML file with command-line overrides layered on top.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::agent::MotionParams;
use crate::consensus::{ConsensusParams, StaticStudyConfig};
use crate::dispersion::DispersionParams;
use crate::engine::{CbptParams, ScenarioMode, ScenarioParams};
use crate::error::{Result, SimError};
use crate::field::{ReferenceRegion, ScalarField};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Disperse,
    ConsensusStatic,
    Full,
    Control,
}

fn default_field() -> ScalarField {
    ScalarField::RadialCone {
        center: Vec2::ZERO,
        slope: 1.0,
        offset: 0.0,
    }
}

/// All knobs of an experiment. Every field defaults to the reference
/// experimental setup; unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub field: ScalarField,
    /// Reference region for ground truth and retention counting. Defaults to
    /// a disk whose mean radial contour sits at 25 cm.
    pub region: Option<ReferenceRegion>,
    pub r_comm: f64,
    pub r_cover: f64,
    pub raster_cell: f64,
    pub distance_threshold: f64,
    pub resume_hysteresis: f64,
    pub straight_run: u32,
    pub tumble_probability: f64,
    pub alpha: f64,
    pub t_comm: u32,
    pub delta: f64,
    pub t_sw: u64,
    /// Tick budget; defaults per scenario when absent.
    pub total_ticks: Option<u32>,
    pub seeds: u32,
    pub seed_base: u64,
    /// Monte Carlo repetitions for the static consensus study.
    pub mc: usize,
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_count: usize,
    pub consensus_max_iterations: usize,
    pub speed: f64,
    pub turn_rate: f64,
    pub dt: f64,
    pub heading_noise_sd: f64,
    /// Defaults to 0.02 * slope * (region extent / 2).
    pub sensor_noise_sd: Option<f64>,
    pub range_noise_fraction: f64,
    pub cbpt_tolerance: Option<f64>,
    pub cbpt_patience: u32,
    pub cbpt_stop_band: Option<f64>,
    pub cbpt_turn_burst: u32,
    pub gt_resolution: f64,
    pub initial_radius: f64,
    pub wait_timeout: u32,
    /// Ticks between survey samples in the control scenario.
    pub sample_period: u32,
    pub freeze_measurements: bool,
    /// Use the non-connectivity-preserving diffusion baseline for `disperse`.
    pub use_diffusion: bool,
    pub write_trajectory: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Full,
            n: 40,
            field: default_field(),
            region: None,
            r_comm: 10.0,
            r_cover: 5.0,
            raster_cell: 0.25,
            distance_threshold: 7.0,
            resume_hysteresis: 7.0,
            straight_run: 0,
            tumble_probability: 0.5,
            alpha: 0.5,
            t_comm: 100,
            delta: 1e-4,
            t_sw: 80,
            total_ticks: None,
            seeds: 1,
            seed_base: 1,
            mc: 1000,
            sweep_start: 0.05,
            sweep_stop: 0.5,
            sweep_count: 20,
            consensus_max_iterations: 2000,
            speed: 1.0,
            turn_rate: std::f64::consts::FRAC_PI_4,
            dt: 1.0,
            heading_noise_sd: 0.05,
            sensor_noise_sd: None,
            range_noise_fraction: 0.1,
            cbpt_tolerance: None,
            cbpt_patience: 5,
            cbpt_stop_band: None,
            cbpt_turn_burst: 3,
            gt_resolution: 0.25,
            initial_radius: 10.0,
            wait_timeout: 50,
            sample_period: 10,
            freeze_measurements: false,
            use_diffusion: false,
            write_trajectory: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| SimError::config("config", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is serializable")
    }

    fn field_center(&self) -> Vec2 {
        match self.field {
            ScalarField::RadialCone { center, .. } | ScalarField::VShapeRamp { center, .. } => {
                center
            }
            ScalarField::Grid(ref g) => g.origin,
        }
    }

    fn field_slope(&self) -> f64 {
        match self.field {
            ScalarField::RadialCone { slope, .. } | ScalarField::VShapeRamp { slope, .. } => slope,
            ScalarField::Grid(_) => 1.0,
        }
    }

    pub fn resolved_region(&self) -> ReferenceRegion {
        self.region.clone().unwrap_or(ReferenceRegion::Disk {
            center: self.field_center(),
            radius: 37.5,
        })
    }

    pub fn resolved_sensor_noise(&self) -> f64 {
        self.sensor_noise_sd.unwrap_or_else(|| {
            0.02 * self.field_slope().abs() * self.resolved_region().extent() / 2.0
        })
    }

    pub fn resolved_total_ticks(&self) -> u32 {
        self.total_ticks.unwrap_or(match self.scenario {
            Scenario::Disperse => 1500,
            Scenario::Full | Scenario::Control => 2000,
            Scenario::ConsensusStatic => 0,
        })
    }

    pub fn scenario_mode(&self) -> ScenarioMode {
        match self.scenario {
            Scenario::Full => ScenarioMode::Full,
            Scenario::Disperse if self.use_diffusion => ScenarioMode::DiffuseOnly,
            Scenario::Disperse => ScenarioMode::DisperseOnly,
            Scenario::Control => ScenarioMode::Control { t_sw: self.t_sw },
            Scenario::ConsensusStatic => ScenarioMode::Full,
        }
    }

    pub fn to_scenario_params(&self) -> Result<ScenarioParams> {
        let noise = self.resolved_sensor_noise();
        let params = ScenarioParams {
            n: self.n,
            field: self.field.clone(),
            region: self.resolved_region(),
            mode: self.scenario_mode(),
            r_comm: self.r_comm,
            r_cover: self.r_cover,
            raster_cell: self.raster_cell,
            motion: MotionParams {
                speed: self.speed,
                turn_rate: self.turn_rate,
                dt: self.dt,
                heading_noise_sd: self.heading_noise_sd,
            },
            dispersion: DispersionParams {
                distance_threshold: self.distance_threshold,
                resume_hysteresis: self.resume_hysteresis,
                straight_run: self.straight_run,
                tumble_probability: self.tumble_probability,
            },
            consensus: ConsensusParams {
                alpha: self.alpha,
                t_comm: self.t_comm,
                delta: self.delta,
            },
            cbpt: CbptParams {
                tolerance: self.cbpt_tolerance.unwrap_or(noise),
                patience_limit: self.cbpt_patience,
                stop_band: self.cbpt_stop_band.unwrap_or(noise),
                turn_burst: self.cbpt_turn_burst,
            },
            sensor_noise_sd: noise,
            range_noise_fraction: self.range_noise_fraction,
            gt_resolution: self.gt_resolution,
            initial_radius: self.initial_radius,
            wait_timeout: self.wait_timeout,
            sample_period: self.sample_period,
            total_ticks: self.resolved_total_ticks(),
            freeze_measurements: self.freeze_measurements,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn sweep_ratios(&self) -> Vec<f64> {
        if self.sweep_count <= 1 {
            return vec![self.sweep_start];
        }
        let step = (self.sweep_stop - self.sweep_start) / (self.sweep_count - 1) as f64;
        (0..self.sweep_count)
            .map(|i| self.sweep_start + i as f64 * step)
            .collect()
    }

    pub fn to_static_study(&self) -> Result<StaticStudyConfig> {
        if self.sweep_count == 0 {
            return Err(SimError::config("sweep_count", "must be at least 1"));
        }
        if self.mc == 0 {
            return Err(SimError::config("mc", "must be at least 1"));
        }
        Ok(StaticStudyConfig {
            n: self.n,
            range_ratios: self.sweep_ratios(),
            repetitions: self.mc,
            alpha: self.alpha,
            delta: self.delta,
            max_iterations: self.consensus_max_iterations,
            base_seed: self.seed_base,
        })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed_base + i).collect()
    }
}
