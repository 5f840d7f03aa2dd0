use std::f64::consts::PI;

use actuation::force::corrected_accelerations;
use actuation::{directional_consistency, extract_force, ActuationError, DoFDirection, DofForces, ForceReport, TrajectoryRecord, DEFAULT_WINDOW};
use inflation_solver::GRAVITY;
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

/// Kinematic acceleration `c − g ẑ + A sin²(π (t − t0) / T)` on `[t0, t0 + T]`:
/// the gravity-corrected acceleration is `c + A sin²(...)`.
#[derive(Debug, Clone, Copy)]
struct Pulse {
    c: Vector3<f64>,
    amp: Vector3<f64>,
    t0: f64,
    width: f64,
}

impl Pulse {
    /// Position from the closed-form double integral, starting at rest at the origin.
    fn position(&self, t: f64) -> Vector3<f64> {
        let base = 0.5 * (self.c - Vector3::z() * GRAVITY) * t * t;
        let s = t - self.t0;
        let w = self.width;
        let shape = if s <= 0.0 {
            0.0
        } else if s <= w {
            0.25 * s * s + w * w / (8.0 * PI * PI) * ((2.0 * PI * s / w).cos() - 1.0)
        } else {
            0.25 * w * w + 0.5 * w * (s - w)
        };
        base + self.amp * shape
    }

    fn corrected(&self, t: f64) -> Vector3<f64> {
        let s = t - self.t0;
        let bump = if (0.0..=self.width).contains(&s) { (PI * s / self.width).sin().powi(2) } else { 0.0 };
        self.c + self.amp * bump
    }

    /// Peak corrected-acceleration norm by dense evaluation.
    fn peak(&self, duration: f64) -> f64 {
        (0..=200_000).map(|i| self.corrected(duration * i as f64 / 200_000.0).norm()).fold(0.0, f64::max)
    }

    fn record(&self, duration: f64, mass: f64) -> TrajectoryRecord {
        let dt = 0.01;
        let n = (duration / dt).round() as usize + 1;
        let pts: Vec<_> = (0..n).map(|i| self.position(i as f64 * dt)).collect();
        TrajectoryRecord::from_positions(0.0, dt, &pts, mass).unwrap()
    }
}

fn pulse_strategy() -> impl Strategy<Value = Pulse> {
    (
        prop::array::uniform3(-1.0..1.0f64),
        prop::array::uniform3(-1.0..1.0f64),
        5.0..200.0f64,
        0.3..0.8f64,
        0.4..1.0f64,
    )
        .prop_filter("non-degenerate direction", |(_, d, ..)| Vector3::from(*d).norm() > 0.1)
        .prop_map(|(c, d, mag, t0, width)| Pulse {
            c: Vector3::from(c) * 2.0,
            amp: Vector3::from(d).normalize() * mag,
            t0,
            width,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovers_peak_force_of_known_profiles(p in pulse_strategy(), mass in 0.001..0.1f64) {
        let duration = 2.0;
        let f = extract_force(&p.record(duration, mass), DEFAULT_WINDOW).unwrap();
        let truth = mass * p.peak(duration);
        prop_assert!((f.magnitude - truth).abs() <= 0.02 * truth, "{} vs {}", f.magnitude, truth);
        prop_assert!((f.direction.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn consistency_is_rotation_invariant(
        dirs in prop::collection::vec(prop::array::uniform3(-0.5..0.5f64), 1..8),
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in -PI..PI,
    ) {
        let trials: Vec<Vector3<f64>> = dirs.iter().map(|d| (Vector3::from(*d) + Vector3::z()).normalize()).collect();
        prop_assume!(Vector3::from(axis).norm() > 1e-3);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
        let a = directional_consistency(&trials).unwrap();
        let rotated: Vec<_> = trials.iter().map(|t| rot * t).collect();
        let b = directional_consistency(&rotated).unwrap();
        for (x, y) in a.per_trial.iter().zip(&b.per_trial) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!((rot * a.mean_direction - b.mean_direction).norm() < 1e-12);
        prop_assert!(a.per_trial.iter().all(|c| (-100.0..=100.0).contains(c)));
    }
}

#[test]
fn free_fall_has_no_force() {
    for window in [1, 3, 5, 9] {
        let pts: Vec<_> = (0..80)
            .map(|i| {
                let t = i as f64 * 0.01;
                Vector3::new(0.3 * t, -0.2 * t, 0.5 + 2.0 * t - 0.5 * GRAVITY * t * t)
            })
            .collect();
        let rec = TrajectoryRecord::from_positions(0.0, 0.01, &pts, 0.0037).unwrap();
        let f = extract_force(&rec, window).unwrap();
        assert!(f.magnitude <= 1e-6, "window {window}: {}", f.magnitude);
    }
}

#[test]
fn constant_push_along_x() {
    let pts: Vec<_> = (0..30)
        .map(|i| {
            let t = i as f64 * 0.01;
            Vector3::new(5.0 * t * t, 0.0, -0.5 * GRAVITY * t * t)
        })
        .collect();
    let rec = TrajectoryRecord::from_positions(0.0, 0.01, &pts, 0.0037).unwrap();
    let f = extract_force(&rec, DEFAULT_WINDOW).unwrap();
    assert!((f.magnitude - 0.037).abs() < 1e-9);
    assert!((f.direction - Vector3::x()).norm() < 1e-9);
}

#[test]
fn uneven_sampling_is_rejected() {
    let samples: Vec<_> = [0.0, 0.01, 0.02, 0.035, 0.04].iter().map(|&t| (t, Vector3::zeros())).collect();
    let rec = TrajectoryRecord::new(
        samples
            .into_iter()
            .map(|(t, position)| actuation::TrajectorySample { t, position, orientation: None })
            .collect(),
        0.1,
    )
    .unwrap();
    assert!(matches!(corrected_accelerations(&rec, 5), Err(ActuationError::NonUniform { .. })));
}

#[test]
fn consistency_closed_form() {
    let deg = |d: f64| d.to_radians();
    let trials: Vec<_> = [0.0, 10.0, -10.0].iter().map(|&a| Vector3::new(deg(a).cos(), 0.0, deg(a).sin())).collect();
    let c = directional_consistency(&trials).unwrap();
    assert!((c.mean_direction - Vector3::x()).norm() < 1e-15);
    for (got, a) in c.per_trial.iter().zip([0.0, 10.0, -10.0]) {
        assert!((got - 100.0 * deg(a).cos()).abs() < 1e-9);
    }
    // Brute-force mean of the per-trial values.
    let mean = (100.0 + 2.0 * 100.0 * deg(10.0).cos()) / 3.0;
    assert!((c.mean - mean).abs() < 1e-9);

    let v = Vector3::new(0.2, -0.3, 0.9).normalize();
    let same = directional_consistency(&[v; 5]).unwrap();
    assert!(same.per_trial.iter().all(|&p| p == 100.0));
    assert_eq!(same.mean, 100.0);
}

#[test]
fn force_table_from_trials() {
    let trials: Vec<_> = [0.9, 1.0, 1.1]
        .iter()
        .map(|&m| {
            let p = Pulse { c: Vector3::zeros(), amp: Vector3::new(0.0, 0.0, m / 0.0037), t0: 0.4, width: 0.5 };
            extract_force(&p.record(1.5, 0.0037), DEFAULT_WINDOW).unwrap()
        })
        .collect();
    let dof = DofForces::from_trials(DoFDirection::Up, &trials).unwrap();
    assert!((dof.mean_force - 1.0).abs() < 0.02);
    assert!((dof.std_force - 0.1).abs() < 0.005);
    assert!((dof.mean_consistency - 100.0).abs() < 1e-9);
    let table = ForceReport::new(vec![dof]).to_table();
    let header: Vec<&str> = table.lines().next().unwrap().split("  ").filter(|s| !s.trim().is_empty()).map(str::trim).collect();
    assert_eq!(header, ["DoF", "Direction", "Force N", "Std N", "Consistency %"]);
}
