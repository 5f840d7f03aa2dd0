//! Mode 2: a heavy plate tilted by inflating against an engaged outboard
//! clutch, and its return once the clutch lets go.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::ActuationError;
use clutch_driver::{apply_event, ClutchEvent, ClutchPattern, ClutchState, Transition};
use inflation_solver::{DeformedState, MembraneModel, PlatePose, RigidPlate};
use membrane_core::design::ClutchId;

/// Lightest plate that loads the membrane noticeably (kg).
pub const MIN_PLATE_MASS: f64 = 0.1;

/// Steepest plate the membrane is taken to support (deg).
pub const MAX_TILT_DEG: f64 = 45.0;

/// Piecewise-linear pressure schedule as `(t s, p Pa)` knots. The tilt
/// solve visits every knot in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureProfile {
    pub knots: Vec<(f64, f64)>,
}

impl PressureProfile {
    /// `steps` equal increments from 0 to `pressure` over `duration`.
    pub fn ramp(pressure: f64, steps: usize, duration: f64) -> Self {
        let steps = steps.max(1);
        let knots = (0..=steps)
            .map(|i| {
                let f = i as f64 / steps as f64;
                (duration * f, pressure * f)
            })
            .collect();
        PressureProfile { knots }
    }

    pub fn constant(pressure: f64, duration: f64) -> Self {
        PressureProfile { knots: vec![(0.0, pressure), (duration, pressure)] }
    }

    fn validate(&self) -> Result<(), ActuationError> {
        if self.knots.is_empty() {
            return Err(ActuationError::Empty);
        }
        for (i, &(t, p)) in self.knots.iter().enumerate() {
            if !(t.is_finite() && p.is_finite() && p >= 0.0) || (i > 0 && t <= self.knots[i - 1].0) {
                return Err(ActuationError::Invalid(format!("pressure knot {i} ({t}, {p})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSample {
    /// s
    pub t: f64,
    /// Pa
    pub pressure: f64,
    /// deg, positive when the plate descends toward the engaged clutch side
    pub roll: f64,
    /// deg, about the axis along the roll reference direction
    pub pitch: f64,
    /// Plate height on the axis (m).
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct TiltResult {
    pub samples: Vec<TiltSample>,
    pub state: DeformedState,
    pub pose: PlatePose,
    pub plate: RigidPlate,
    /// Horizontal unit vector toward the engaged outboard clutches.
    pub roll_reference: Vector2<f64>,
}

impl TiltResult {
    pub fn final_roll(&self) -> f64 {
        self.samples.last().map(|s| s.roll).unwrap_or(0.0)
    }
}

/// Unit vector toward the engaged outboard clutches, if they single one out.
fn roll_reference(pattern: &ClutchPattern) -> Option<Vector2<f64>> {
    let sum: Vector2<f64> = ClutchId::OUTBOARD
        .into_iter()
        .filter(|&c| pattern.is_engaged(c))
        .filter_map(|c| c.azimuth())
        .map(|a| Vector2::new(a.cos(), a.sin()))
        .sum();
    sum.try_normalize(1e-9)
}

fn tilt_angles(pose: &PlatePose, reference: Vector2<f64>) -> (f64, f64) {
    let side = Vector2::new(-reference.y, reference.x);
    (pose.roll_deg(reference), pose.roll_deg(side))
}

fn check_support(pose: &PlatePose) -> Result<(), ActuationError> {
    let tilt = pose.slope.norm().atan().to_degrees();
    if !(tilt <= MAX_TILT_DEG) {
        return Err(ActuationError::PlateUnsupported(format!("plate tilted {tilt:.1}°")));
    }
    Ok(())
}

/// Quasi-static plate pose along the pressure profile. Without a single
/// preferred clutch side (no outboard clutch, or a symmetric set) the roll
/// reference is +x.
pub fn mode2_tilt(
    model: &MembraneModel,
    pattern: &ClutchPattern,
    profile: &PressureProfile,
    plate: &RigidPlate,
) -> Result<TiltResult, ActuationError> {
    if !(plate.mass >= MIN_PLATE_MASS) {
        return Err(ActuationError::Invalid(format!("plate mass {} kg is below {MIN_PLATE_MASS} kg", plate.mass)));
    }
    profile.validate()?;
    let reference = roll_reference(pattern).unwrap_or_else(Vector2::x);
    let mut samples = Vec::with_capacity(profile.knots.len());
    let mut current: Option<(DeformedState, PlatePose)> = None;
    let mut pattern = pattern.clone();
    for &(t, p) in &profile.knots {
        let start = match &current {
            Some((s, pose)) => (s.clone(), *pose),
            None => (DeformedState::rest(model.mesh.clone(), pattern.clone()), PlatePose::default()),
        };
        let eq = model.solve_with_plate(&pattern, p, plate, Some((&start.0, start.1)), None)?;
        check_support(&eq.pose)?;
        let (roll, pitch) = tilt_angles(&eq.pose, reference);
        samples.push(TiltSample { t, pressure: p, roll, pitch, height: eq.pose.height });
        pattern = eq.state.pattern.clone();
        current = Some((eq.state, eq.pose));
    }
    let (state, pose) = current.expect("profile has at least one knot");
    Ok(TiltResult { samples, state, pose, plate: *plate, roll_reference: reference })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReleaseConfig {
    pub damping_ratio: f64,
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// Roll offset used to measure the rotational stiffness (deg).
    pub probe_angle: f64,
}

impl Default for ReleaseConfig {
    fn default() -> Self {
        ReleaseConfig { damping_ratio: 0.3, duration: 2.0, sample_rate: 100.0, probe_angle: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseResult {
    /// `(t s, roll deg)`
    pub samples: Vec<(f64, f64)>,
    /// Equilibrium roll with the clutch released (deg).
    pub final_roll: f64,
    /// Rotational stiffness about the roll axis (N·m/rad).
    pub stiffness: f64,
    /// kg·m²
    pub inertia: f64,
    /// rad/s
    pub natural_frequency: f64,
    pub pattern: ClutchPattern,
}

impl ReleaseResult {
    /// Sign changes of `roll − final_roll`, ignoring samples within `deadband` deg.
    pub fn overshoots(&self, deadband: f64) -> usize {
        let mut last = 0.0f64;
        let mut count = 0;
        for &(_, r) in &self.samples {
            let e = r - self.final_roll;
            if e.abs() <= deadband {
                continue;
            }
            if last != 0.0 && e.signum() != last.signum() {
                count += 1;
            }
            last = e;
        }
        count
    }
}

/// Releases every engaged outboard clutch and integrates the plate's roll.
///
/// The plate is reduced to one rotational degree of freedom:
/// `I θ'' + 2ζ√(kI) θ' + k (θ − θ_f) = 0`, with `I` the plate's inertia about
/// its in-plane centre axis, `θ_f` the released equilibrium roll, and `k` the
/// membrane's restoring stiffness from two solves at `θ_f ± probe_angle` with
/// the tilt held.
pub fn mode2_release(model: &MembraneModel, tilt: &TiltResult, config: &ReleaseConfig) -> Result<ReleaseResult, ActuationError> {
    let ReleaseConfig { damping_ratio, duration, sample_rate, probe_angle } = *config;
    if !(damping_ratio >= 0.0 && duration >= 0.0 && sample_rate > 0.0 && probe_angle > 0.0 && probe_angle < 20.0) {
        return Err(ActuationError::Invalid(format!("bad release config {config:?}")));
    }
    let plate = tilt.plate;
    let reference = tilt.roll_reference;
    let mut released = tilt.state.pattern.clone();
    for c in ClutchId::OUTBOARD {
        if released.state(c) == ClutchState::Active {
            released = apply_event(&released, &ClutchEvent::new(0.0, c, Transition::Deactivate))?;
        }
    }
    let pressure = tilt.state.pressure;
    let rest = model.solve_with_plate(&released, pressure, &plate, Some((&tilt.state, tilt.pose)), None)?;
    check_support(&rest.pose)?;
    let theta_f = rest.pose.roll_deg(reference).to_radians();

    // Generalized force along increasing roll at a held tilt.
    let moment_at = |theta: f64| -> Result<f64, ActuationError> {
        let along = rest.pose.slope.dot(&reference);
        let slope = rest.pose.slope + reference * (-theta.tan() - along);
        let pose = PlatePose { slope, ..rest.pose };
        let eq = model.solve_with_plate(&released, pressure, &plate, Some((&rest.state, pose)), Some(slope))?;
        let q = Vector2::new(eq.generalized_force[1], eq.generalized_force[2]);
        // d(slope)/dθ = −(1 + tan²θ) · reference
        Ok(-q.dot(&reference) * (1.0 + theta.tan().powi(2)))
    };
    let d = probe_angle.to_radians();
    let stiffness = -(moment_at(theta_f + d)? - moment_at(theta_f - d)?) / (2.0 * d);
    if !(stiffness > 0.0) {
        return Err(ActuationError::PlateUnsupported(format!("no restoring moment (k = {stiffness:e} N·m/rad)")));
    }
    let inertia = plate.roll_inertia();
    let omega = (stiffness / inertia).sqrt();

    let theta0 = tilt.pose.roll_deg(reference).to_radians();
    let accel = |th: f64, w: f64| -2.0 * damping_ratio * omega * w - omega * omega * (th - theta_f);
    let dt_out = 1.0 / sample_rate;
    let sub = ((dt_out * omega / 0.05).ceil() as usize).max(1);
    let h = dt_out / sub as f64;
    let (mut th, mut w) = (theta0, 0.0);
    let n = (duration * sample_rate).round() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push((0.0, th.to_degrees()));
    for i in 1..=n {
        for _ in 0..sub {
            let (k1t, k1w) = (w, accel(th, w));
            let (k2t, k2w) = (w + 0.5 * h * k1w, accel(th + 0.5 * h * k1t, w + 0.5 * h * k1w));
            let (k3t, k3w) = (w + 0.5 * h * k2w, accel(th + 0.5 * h * k2t, w + 0.5 * h * k2w));
            let (k4t, k4w) = (w + h * k3w, accel(th + h * k3t, w + h * k3w));
            th += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        }
        samples.push((i as f64 * dt_out, th.to_degrees()));
    }
    Ok(ReleaseResult {
        samples,
        final_roll: theta_f.to_degrees(),
        stiffness,
        inertia,
        natural_frequency: omega,
        pattern: released,
    })
}
