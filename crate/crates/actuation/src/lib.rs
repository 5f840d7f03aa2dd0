//! Mode 1 (light payload launch) and Mode 2 (heavy plate tilt) scenarios, and
//! the trajectory analytics used to turn motion capture into forces.

pub mod direction;
pub mod force;
pub mod launch;
pub mod mode2;
pub mod report;
pub mod trajectory;
pub mod workspace;

use thiserror::Error;

pub use direction::DoFDirection;
pub use force::{directional_consistency, extract_force, Consistency, ForceEstimate, DEFAULT_WINDOW};
pub use launch::{mode1_launch, LaunchConfig, LaunchResult, Payload};
pub use mode2::{mode2_release, mode2_tilt, PressureProfile, ReleaseConfig, ReleaseResult, TiltResult, TiltSample};
pub use report::{DofForces, ForceReport, TrialForce};
pub use trajectory::{TrajectoryRecord, TrajectorySample};
pub use workspace::{mode1_workspace, mode1_workspace_with, payload_position, Patch, WorkspaceEntry, WorkspaceResult};

#[derive(Debug, Error)]
pub enum ActuationError {
    #[error(transparent)]
    Solve(#[from] inflation_solver::SolveError),
    #[error(transparent)]
    Clutch(#[from] clutch_driver::ClutchError),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample interval {index} is {dt} s, expected {expected} s within 1%")]
    NonUniform { index: usize, dt: f64, expected: f64 },
    #[error("timestamps must strictly increase (sample {0})")]
    NotIncreasing(usize),
    #[error("vector {0} has zero length")]
    ZeroVector(usize),
    #[error("directions cancel out; mean direction is undefined")]
    ZeroMean,
    #[error("empty input")]
    Empty,
    #[error("plate lost its support: {0}")]
    PlateUnsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("trajectory parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
