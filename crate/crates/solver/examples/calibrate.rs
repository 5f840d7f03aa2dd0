//! Prints apex heights of the named patterns at 3.1 kPa (or `$PRESSURE` Pa)
//! for a layout given as JSON on the command line (defaults otherwise).

use std::time::Instant;

use clutch_driver::ClutchPattern;
use membrane_core::design::{build_design, DesignLayout};
use inflation_solver::{apex, MembraneModel, SolveError, SolverConfig};

fn main() {
    let layout: DesignLayout = std::env::args()
        .nth(1)
        .map(|s| serde_json::from_str(&s).expect("layout JSON"))
        .unwrap_or_default();
    let patterns: Vec<String> = std::env::args().skip(2).collect();
    let patterns = if patterns.is_empty() { vec!["plateau".into(), "round".into(), "pyramid".into()] } else { patterns };
    let design = build_design(&layout);
    design.validate().expect("valid design");
    let config = SolverConfig::default();
    let pressure: f64 = std::env::var("PRESSURE").ok().map(|p| p.parse().expect("pressure")).unwrap_or(3100.0);
    let model = MembraneModel::new(&design, &config).expect("model");
    println!("{} vertices, {} triangles", model.mesh.vertex_count(), model.mesh.triangle_count());
    for name in patterns {
        let pattern = ClutchPattern::named(name.parse().unwrap());
        let t = Instant::now();
        match model.solve_equilibrium(&pattern, pressure, None) {
            Ok(s) => {
                let (_, shear) = model.clutch_constraint_forces(&s.positions(), &s.pattern);
                println!(
                    "{name}: apex {:.1} mm, residual {:.2e}, {:.1} s, engaged {:?}, shear {:?}",
                    apex(&s).height * 1e3,
                    s.residual_norm,
                    t.elapsed().as_secs_f64(),
                    s.pattern.active(),
                    shear
                )
            }
            Err(SolveError::NotConverged { iterations, residual, last_state, residual_history }) => {
                println!(
                    "{name}: not converged after {iterations} ({residual:.2e}), apex {:.1} mm, pressure {} Pa, {:.1} s",
                    apex(&last_state).height * 1e3,
                    last_state.pressure,
                    t.elapsed().as_secs_f64()
                );
                if std::env::var_os("HISTORY").is_some() {
                    let line: Vec<String> = residual_history.iter().map(|r| format!("{r:.1e}")).collect();
                    println!("{}", line.join(" "));
                }
            }
            Err(e) => println!("{name}: {e}"),
        }
    }
}
