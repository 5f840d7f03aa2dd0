use actuation::ActuationError;
use clutch_driver::ClutchError;
use inflation_solver::SolveError;
use membrane_core::design::DesignError;
use membrane_core::mesh::MeshError;
use pointcloud::CloudError;
use serde_json::json;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Clutch(#[from] ClutchError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Actuation(#[from] ActuationError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// True when the failure is the caller's input rather than the run.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            CliError::Invalid(_) | CliError::Design(_) | CliError::Mesh(_) | CliError::Clutch(_) | CliError::Json(_) => true,
            CliError::Solve(e) => matches!(e, SolveError::Config(_) | SolveError::Pressure(_) | SolveError::Clutch(_) | SolveError::Mesh(_)),
            CliError::Actuation(e) => matches!(e, ActuationError::Invalid(_) | ActuationError::Parse(_) | ActuationError::Clutch(_)),
            CliError::Cloud(e) => matches!(e, CloudError::Parse(_) | CloudError::Format(_) | CloudError::ZeroK | CloudError::NonFinite(_)),
            CliError::Io { .. } => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_invalid_input() {
            EXIT_INVALID
        } else {
            EXIT_RUNTIME
        }
    }

    /// The error object written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = if self.is_invalid_input() { "invalid_input" } else { "runtime" };
        json!({ "error": { "kind": kind, "code": self.exit_code(), "message": self.to_string() } })
    }
}
