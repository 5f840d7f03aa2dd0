//! Force on a payload from its recorded trajectory, and the directional
//! consistency of repeated trials.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::trajectory::TrajectoryRecord;
use crate::ActuationError;
use inflation_solver::GRAVITY;

/// Moving-average window (samples) applied to the differentiated acceleration.
pub const DEFAULT_WINDOW: usize = 5;

/// Allowed relative deviation of any sample interval from the mean interval.
pub const TIMESTAMP_JITTER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimate {
    /// N
    pub magnitude: f64,
    /// Unit vector, or zero when no net force was found.
    pub direction: Vector3<f64>,
    /// Instant of the reported force (s).
    pub time: f64,
    /// Gravity-corrected acceleration at that instant (m/s²).
    pub acceleration: Vector3<f64>,
}

/// Smoothed, gravity-corrected acceleration at each interior sample, as
/// `(t, a + g ẑ)`.
///
/// Second central differences are averaged over a centred window of
/// `window` samples (even windows are widened by one); near the ends the
/// window shrinks symmetrically so it stays centred.
pub fn corrected_accelerations(record: &TrajectoryRecord, window: usize) -> Result<Vec<(f64, Vector3<f64>)>, ActuationError> {
    let s = &record.samples;
    if s.len() < 3 {
        return Err(ActuationError::TooFewSamples { needed: 3, got: s.len() });
    }
    let dt = (s[s.len() - 1].t - s[0].t) / (s.len() - 1) as f64;
    for (i, w) in s.windows(2).enumerate() {
        let step = w[1].t - w[0].t;
        if !((step - dt).abs() <= TIMESTAMP_JITTER * dt) {
            return Err(ActuationError::NonUniform { index: i, dt: step, expected: dt });
        }
    }
    let raw: Vec<Vector3<f64>> = s
        .windows(3)
        .map(|w| (w[2].position - 2.0 * w[1].position + w[0].position) / (dt * dt))
        .collect();
    let half = window / 2;
    let n = raw.len();
    let g = Vector3::new(0.0, 0.0, GRAVITY);
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let sum: Vector3<f64> = raw[i - h..=i + h].iter().sum();
            (s[i + 1].t, sum / (2 * h + 1) as f64 + g)
        })
        .collect())
}

/// Peak force on the payload: mass times the largest gravity-corrected
/// acceleration norm over the record. The first maximum wins ties.
pub fn extract_force(record: &TrajectoryRecord, window: usize) -> Result<ForceEstimate, ActuationError> {
    let acc = corrected_accelerations(record, window)?;
    let (time, a) = acc
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, Vector3<f64>)>, (t, a)| match best {
            Some((_, b)) if b.norm() >= a.norm() => best,
            _ => Some((t, a)),
        })
        .expect("at least one interior sample");
    let norm = a.norm();
    let direction = if norm > 0.0 { a / norm } else { Vector3::zeros() };
    Ok(ForceEstimate { magnitude: record.payload_mass * norm, direction, time, acceleration: a })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub mean_direction: Vector3<f64>,
    /// `100 · mean · trialᵢ`, in [−100, 100].
    pub per_trial: Vec<f64>,
    pub mean: f64,
}

/// Agreement of trial force directions with their normalized vector sum.
/// Inputs are normalized first.
pub fn directional_consistency(directions: &[Vector3<f64>]) -> Result<Consistency, ActuationError> {
    if directions.is_empty() {
        return Err(ActuationError::Empty);
    }
    let mut units = Vec::with_capacity(directions.len());
    for (i, d) in directions.iter().enumerate() {
        let n = d.norm();
        if !(n > 1e-12 && n.is_finite()) {
            return Err(ActuationError::ZeroVector(i));
        }
        units.push(d / n);
    }
    let sum: Vector3<f64> = units.iter().sum();
    if sum.norm() <= 1e-12 * units.len() as f64 {
        return Err(ActuationError::ZeroMean);
    }
    let mean_direction = sum.normalize();
    let per_trial: Vec<f64> = units.iter().map(|u| (100.0 * mean_direction.dot(u)).clamp(-100.0, 100.0)).collect();
    let mean = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    Ok(Consistency { mean_direction, per_trial, mean })
}
