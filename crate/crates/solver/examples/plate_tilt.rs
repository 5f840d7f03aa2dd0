use std::time::Instant;

use clutch_driver::ClutchPattern;
use inflation_solver::{MembraneModel, RigidPlate, SolverConfig};
use membrane_core::design::{build_default_design, ClutchId};
use nalgebra::Vector2;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mass: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.82);
    let half: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let h: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.005);
    let design = build_default_design();
    let config = SolverConfig { mesh_edge_length: h, ..SolverConfig::default() };
    let model = MembraneModel::new(&design, &config).unwrap();
    let pattern = ClutchPattern::with_active(&[ClutchId::OutboardE]);
    let plate = RigidPlate::new(mass, half);
    let steps = 10;
    let mut prev = None;
    let t0 = Instant::now();
    for s in 0..=steps {
        let p = 3100.0 * s as f64 / steps as f64;
        let start = prev.as_ref().map(|(st, pose)| (st, *pose));
        let eq = model.solve_with_plate(&pattern, p, &plate, start, None).unwrap();
        println!(
            "p {p:6.0} h {:7.2} mm roll {:6.2} pitch {:6.2} F {:?} res {:.1e} t {:.1}s",
            eq.pose.height * 1e3,
            eq.pose.roll_deg(Vector2::new(1.0, 0.0)),
            eq.pose.roll_deg(Vector2::new(0.0, 1.0)),
            eq.generalized_force,
            eq.state.residual_norm,
            t0.elapsed().as_secs_f64()
        );
        prev = Some((eq.state, eq.pose));
    }
}
