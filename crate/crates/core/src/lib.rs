//! Deterministic, seedable simulator for collective estimation of continuous
//! environmental fields by robot swarms: connectivity-preserving dispersion,
//! memory-weighted local averaging on dynamic proximity networks, and
//! consensus-based phototaxis onto mean-value contours, with the metrics and
//! experiment protocols to study them.

pub mod agent;
pub mod config;
pub mod consensus;
pub mod dispersion;
pub mod engine;
pub mod error;
pub mod field;
pub mod geom;
pub mod metrics;
pub mod network;

pub use agent::{AgentState, Motion, MotionParams, NeighborReading, Phase};
pub use config::{ExperimentConfig, Scenario};
pub use consensus::{ConsensusParams, EstimateVector, StaticStudyConfig, StaticStudyRow};
pub use dispersion::DispersionParams;
pub use engine::{
    CbptController, CbptParams, ScenarioMode, ScenarioParams, TrajectoryRow, World,
};
pub use error::{Result, SimError};
pub use field::{GridField, ReferenceRegion, ScalarField};
pub use geom::Vec2;
pub use metrics::MetricsRecord;
pub use network::ProximityGraph;
