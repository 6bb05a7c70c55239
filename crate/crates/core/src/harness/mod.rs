//! Simulation harness: scenarios, random drops, experiment drivers and the
//! command-line front end. Every output is a deterministic function of the
//! scenario and its seed.

pub mod cli;
pub mod drops;
pub mod experiments;
pub mod output;
pub mod scenario;

use crate::channel::ChannelError;
use crate::estimation::EstimationError;
use crate::powerctl::PowerError;
use crate::sefficiency::SeError;
use thiserror::Error;

pub use drops::{drop_users, prepare_drop, Drop, Geometry, PreparedDrop};
pub use experiments::{
    run_asymptotic, run_convergence_trace, run_power_experiment, run_sweep, run_validation, SweepKind,
};
pub use scenario::{NetworkScenario, Preset, ScenarioError, TargetSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Se(#[from] SeError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
