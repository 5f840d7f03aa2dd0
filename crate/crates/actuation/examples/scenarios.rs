use std::time::Instant;

use actuation::*;
use clutch_driver::ClutchPattern;
use inflation_solver::{MembraneModel, RigidPlate, SolverConfig};
use membrane_core::design::{build_default_design, ClutchId};

fn main() {
    let what = std::env::args().nth(1).unwrap_or_default();
    let h: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(0.005);
    let config = SolverConfig { mesh_edge_length: h, ..SolverConfig::default() };
    let model = MembraneModel::new(&build_default_design(), &config).unwrap();
    let t0 = Instant::now();
    match what.as_str() {
        "workspace" => {
            let w = mode1_workspace(&model, 1700.0, &DoFDirection::ALL).unwrap();
            for (d, e) in &w.entries {
                println!("{d:12} {:?} lateral {:?} slipped {:?} err {:?}", e.displacement.map(|v| v * 1e3), e.lateral.map(|l| l * 1e3), e.slipped, e.error);
            }
        }
        "launch" => {
            for d in [DoFDirection::Up, DoFDirection::Left, DoFDirection::FrontRight] {
                let p = d.trial_pressure();
                let r = mode1_launch(&model, d, p, &Payload::default(), &LaunchConfig::default()).unwrap();
                let f = extract_force(&r.record, DEFAULT_WINDOW).unwrap();
                println!(
                    "{d}: release {:?} v {:?} samples {} ride {} force {:.4} dir {:?} t {:.1}s",
                    r.release_time, r.launch_velocity, r.record.len(), r.ride_samples, f.magnitude, f.direction, t0.elapsed().as_secs_f64()
                );
            }
        }
        "mode2" => {
            let plate = RigidPlate::new(0.82, 0.1);
            let tilt = mode2_tilt(&model, &ClutchPattern::with_active(&[ClutchId::OutboardE]), &PressureProfile::ramp(3100.0, 10, 5.0), &plate).unwrap();
            for s in &tilt.samples {
                println!("{s:?}");
            }
            let rel = mode2_release(&model, &tilt, &ReleaseConfig::default()).unwrap();
            println!("final {} k {} I {} w {} overshoots {}", rel.final_roll, rel.stiffness, rel.inertia, rel.natural_frequency, rel.overshoots(0.01));
            for s in rel.samples.iter().step_by(5) {
                print!("{:.2}:{:.2} ", s.0, s.1);
            }
            println!("\nt {:.1}s", t0.elapsed().as_secs_f64());
        }
        _ => eprintln!("workspace | launch | mode2"),
    }
}
