use clutch_driver::ClutchPattern;
use inflation_solver::{apex, MembraneModel, SolveError, SolverConfig};
use membrane_core::design::build_default_design;

fn main() {
    let p: f64 = std::env::args().nth(1).unwrap().parse().unwrap();
    for iters in [200, 400, 800, 1200, 1400, 1600, 1800, 2000, 4000, 10000] {
        let config = SolverConfig { pressure_steps: 1, max_iterations: iters, ..SolverConfig::default() };
        let model = MembraneModel::new(&build_default_design(), &config).unwrap();
        match model.solve_equilibrium(&ClutchPattern::pyramid(), p, None) {
            Ok(s) => { println!("{iters}: converged apex {:.3} mm", apex(&s).height * 1e3); break; }
            Err(SolveError::NotConverged { residual, last_state, .. }) => {
                let x = last_state.positions();
                let (i, d) = last_state.displacement.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
                println!("{iters}: res {residual:.3e} apex {:.3} mm maxdisp {:.3e} at v{i} r={:.4} pos {:?}", apex(&last_state).height * 1e3, d.norm(), last_state.mesh.vertices[i].xy().norm(), x[i]);
            }
            Err(e) => println!("{e}"),
        }
    }
}
