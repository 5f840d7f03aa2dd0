//! Mode 1: a light ball thrown by releasing the inboard clutch.
//!
//! The ball's weight is ignored by the membrane. It rides the central patch
//! of the surface until the patch accelerates away from it faster than
//! gravity can follow, then flies ballistically from the patch velocity.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::direction::DoFDirection;
use crate::trajectory::{TrajectoryRecord, TrajectorySample};
use crate::workspace::Patch;
use crate::ActuationError;
use clutch_driver::{apply_event, ClutchEvent, Transition};
use inflation_solver::{MembraneModel, TransientStepper, GRAVITY};
use membrane_core::design::ClutchId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    /// kg
    pub mass: f64,
    /// m
    pub diameter: f64,
}

impl Default for Payload {
    /// The 3.7 g, 40 mm ball.
    fn default() -> Self {
        Payload { mass: 0.0037, diameter: 0.04 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaunchConfig {
    /// Longest membrane transient simulated while waiting for release (s).
    pub ride_duration: f64,
    /// Longest ballistic segment recorded (s).
    pub flight_duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// Radius of the surface patch the ball sits on (m).
    pub patch_radius: f64,
    /// Interval of the patch-velocity differences used for the release test (s).
    pub probe_interval: f64,
}

impl Default for LaunchConfig {
    fn default() -> Self {
        LaunchConfig { ride_duration: 0.15, flight_duration: 1.0, sample_rate: 100.0, patch_radius: 0.01, probe_interval: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchResult {
    /// Ball centre, sampled at `sample_rate` from the moment of release of
    /// the clutch.
    pub record: TrajectoryRecord,
    /// Time the ball left the membrane (s), if it did.
    pub release_time: Option<f64>,
    /// Ball velocity at separation (m/s).
    pub launch_velocity: Option<Vector3<f64>>,
    /// Number of leading samples taken while riding the membrane.
    pub ride_samples: usize,
}

/// Inflates with `direction`'s launch pattern, releases the inboard clutch
/// and follows the ball. Without separation the record ends on the membrane.
pub fn mode1_launch(
    model: &MembraneModel,
    direction: DoFDirection,
    pressure: f64,
    payload: &Payload,
    config: &LaunchConfig,
) -> Result<LaunchResult, ActuationError> {
    if !(payload.mass > 0.0 && payload.mass < 0.05 && payload.diameter > 0.0) {
        return Err(ActuationError::Invalid(format!("payload must be lighter than 50 g, got {payload:?}")));
    }
    if !(config.sample_rate > 0.0 && config.probe_interval > 0.0 && config.ride_duration >= 0.0 && config.flight_duration >= 0.0) {
        return Err(ActuationError::Invalid(format!("bad launch config {config:?}")));
    }
    let loaded = model.solve_equilibrium(&direction.launch_pattern(), pressure, None)?;
    let fire = ClutchEvent::new(0.0, ClutchId::Inboard, Transition::Deactivate);
    let released = apply_event(&loaded.pattern, &fire)?;
    let radius = 0.5 * payload.diameter;
    let patch = Patch::around(&model.mesh, Vector3::zeros(), config.patch_radius);

    let dt_sample = 1.0 / config.sample_rate;
    // Probe steps per output sample, so both grids line up.
    let per_sample = ((dt_sample / config.probe_interval).round() as usize).max(1);
    let probe = dt_sample / per_sample as f64;
    let g = Vector3::new(0.0, 0.0, GRAVITY);

    let mut sim = TransientStepper::new(model, &loaded, released);
    let mut positions = Vec::new();
    positions.push(patch.ball_centre(&sim.x, radius));
    let mut v_prev = patch.mean(&sim.v);
    let mut separation = None;
    let mut k = 0usize;
    while (k + 1) as f64 * probe <= config.ride_duration + 1e-12 {
        k += 1;
        sim.advance_to(k as f64 * probe)?;
        let v = patch.mean(&sim.v);
        let a = (v - v_prev) / probe;
        v_prev = v;
        let n = patch.normal(&sim.x);
        let here = patch.ball_centre(&sim.x, radius);
        if (a + g).dot(&n) < 0.0 {
            separation = Some((sim.time, here, v));
            break;
        }
        if k.is_multiple_of(per_sample) {
            positions.push(here);
        }
    }
    let ride_samples = positions.len();
    if let Some((t_r, p_r, v_r)) = separation {
        let mut i = ride_samples;
        loop {
            let t = i as f64 * dt_sample;
            let s = t - t_r;
            if s > config.flight_duration {
                break;
            }
            let p = p_r + v_r * s - 0.5 * g * s * s;
            positions.push(p);
            if p.z < radius {
                break;
            }
            i += 1;
        }
    }
    let samples: Vec<TrajectorySample> = positions
        .into_iter()
        .enumerate()
        .map(|(i, position)| TrajectorySample { t: i as f64 * dt_sample, position, orientation: None })
        .collect();
    let mut record = TrajectoryRecord::new(samples, payload.mass)?;
    record.sample_rate = config.sample_rate;
    Ok(LaunchResult {
        record,
        release_time: separation.map(|s| s.0),
        launch_velocity: separation.map(|s| s.2),
        ride_samples,
    })
}
