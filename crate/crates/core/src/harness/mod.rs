//! Scenario configuration, mission supervision, metrics and the closed-loop runner.

pub mod config;
pub mod metrics;
pub mod mission;
pub mod runner;

pub use config::{MissionConfig, Scenario, VesselConfig};
pub use metrics::{compute_metrics, MetricsError, MetricsReport, PlanarSample};
pub use mission::{four_corner_mission, HoldCondition, MissionSupervisor};
pub use runner::{run_scenario, simulate, RunOutput};

use crate::integrator::IntegratorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("simulation diverged: {0}")]
    Diverged(IntegratorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl HarnessError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Diverged(_) => 2,
            _ => 1,
        }
    }
}

impl From<IntegratorError> for HarnessError {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::Io(io) => HarnessError::Io(io),
            other => HarnessError::Diverged(other),
        }
    }
}
