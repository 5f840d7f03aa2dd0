//! Per-direction force summaries in the layout of the force table.

use std::fmt::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::direction::DoFDirection;
use crate::force::{directional_consistency, ForceEstimate};
use crate::ActuationError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialForce {
    /// N
    pub magnitude: f64,
    pub direction: Vector3<f64>,
    /// s
    pub time: f64,
    /// %
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofForces {
    pub dof: DoFDirection,
    pub trials: Vec<TrialForce>,
    /// N
    pub mean_force: f64,
    /// Sample standard deviation (N); zero for a single trial.
    pub std_force: f64,
    pub mean_direction: Vector3<f64>,
    /// %
    pub mean_consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceReport {
    pub schema_version: u32,
    pub dofs: Vec<DofForces>,
}

impl DofForces {
    pub fn from_trials(dof: DoFDirection, trials: &[ForceEstimate]) -> Result<Self, ActuationError> {
        if trials.is_empty() {
            return Err(ActuationError::Empty);
        }
        let dirs: Vec<Vector3<f64>> = trials.iter().map(|t| t.direction).collect();
        let c = directional_consistency(&dirs)?;
        let n = trials.len() as f64;
        let mean_force = trials.iter().map(|t| t.magnitude).sum::<f64>() / n;
        let std_force = if trials.len() > 1 {
            (trials.iter().map(|t| (t.magnitude - mean_force).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(DofForces {
            dof,
            trials: trials
                .iter()
                .zip(&c.per_trial)
                .map(|(t, &consistency)| TrialForce { magnitude: t.magnitude, direction: t.direction, time: t.time, consistency })
                .collect(),
            mean_force,
            std_force,
            mean_direction: c.mean_direction,
            mean_consistency: c.mean,
        })
    }
}

impl ForceReport {
    pub fn new(dofs: Vec<DofForces>) -> Self {
        ForceReport { schema_version: REPORT_SCHEMA_VERSION, dofs }
    }

    /// Plain-text table with columns DoF, Direction, Force N, Std N, Consistency %.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12}  {:<24}  {:>9}  {:>9}  {:>13}", "DoF", "Direction", "Force N", "Std N", "Consistency %");
        for d in &self.dofs {
            let v = d.mean_direction;
            let dir = format!("({:+.2}, {:+.2}, {:+.2})", v.x, v.y, v.z);
            let _ = writeln!(
                out,
                "{:<12}  {:<24}  {:>9.3}  {:>9.3}  {:>13.1}",
                d.dof.label(),
                dir,
                d.mean_force,
                d.std_force,
                d.mean_consistency
            );
        }
        out
    }
}
