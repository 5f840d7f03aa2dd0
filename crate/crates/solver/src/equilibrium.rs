//! Quasi-static and transient inflation of the clutch-patterned membrane.
//!
//! Equilibrium is found by dynamic relaxation with kinetic damping: the
//! structure is integrated in pseudo-time with stiffness-proportional nodal
//! masses and all velocities are zeroed whenever the kinetic energy peaks.
//! Transients use the physical lumped masses and viscous damping only.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use clutch_driver::{apply_event, check_slip, ClutchError, ClutchEvent, ClutchPattern, Transition, DEFAULT_SLIP_THRESHOLD};
use membrane_core::design::{ClutchId, MembraneDesign, RingMaterial};
use membrane_core::element::{element_energy_and_forces, element_stiffness_bound, RestTriangle};
use crate::loads::{accumulate_pressure_forces, enclosed_volume};
use crate::plate::{PlateSystem, PlatePose, RigidPlate};
use membrane_core::material::Constitutive;
use membrane_core::mesh::{generate_mesh, Mesh, MeshError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Number of equal pressure increments used to reach the target pressure.
    pub pressure_steps: usize,
    /// Zero all velocities at kinetic-energy peaks during relaxation.
    pub kinetic_damping: bool,
    /// Viscous damping coefficient (1/s). Applied in transients, and in
    /// relaxation when kinetic damping is off.
    pub viscous_damping: f64,
    /// Transient time step (s); an upper bound when `adaptive_dt` is set.
    pub dt: f64,
    /// Clamp the transient step to the explicit stability estimate.
    pub adaptive_dt: bool,
    /// Iteration budget for one equilibrium solve.
    pub max_iterations: usize,
    /// Residual force norm (N) accepted as equilibrium.
    pub residual_tol: f64,
    /// Fraction of compressive energy kept by the wrinkling model, in (0, 1].
    pub wrinkle_stiffness_factor: f64,
    /// Maximum mesh edge length (m).
    pub mesh_edge_length: f64,
    /// Clutch interfacial shear capacity (Pa).
    pub slip_threshold: f64,
    /// Spacing of emitted transient frames (s).
    pub frame_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            pressure_steps: 20,
            kinetic_damping: true,
            viscous_damping: 20.0,
            dt: 2.0e-5,
            adaptive_dt: true,
            max_iterations: 200_000,
            residual_tol: 1e-3,
            wrinkle_stiffness_factor: 0.01,
            mesh_edge_length: 0.005,
            slip_threshold: DEFAULT_SLIP_THRESHOLD,
            frame_interval: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if self.pressure_steps < 1 {
            return bad("pressure_steps must be at least 1");
        }
        if !(self.wrinkle_stiffness_factor > 0.0 && self.wrinkle_stiffness_factor <= 1.0) {
            return bad("wrinkle_stiffness_factor must lie in (0, 1]");
        }
        if !(self.viscous_damping >= 0.0) {
            return bad("viscous_damping must be non-negative");
        }
        if !(self.frame_interval > 0.0) {
            return bad("frame_interval must be positive");
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self, SolveError> {
        let c: SolverConfig = serde_json::from_str(s).map_err(|e| SolveError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Clutch(#[from] ClutchError),
    #[error("solver config: {0}")]
    Config(String),
    #[error("pressure must be finite and non-negative, got {0}")]
    Pressure(f64),
    #[error("no equilibrium after {iterations} iterations (residual {residual:.3e} N)")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_state: Box<DeformedState>,
        residual_history: Vec<f64>,
    },
    #[error("transient diverged at step {step} (t = {time:.6} s)")]
    Unstable { step: usize, time: f64 },
    #[error("transients start from a clutch deactivation, got {0}")]
    NotADeactivation(Transition),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformedState {
    pub mesh: Arc<Mesh>,
    /// Per-vertex displacement from the flat rest state (m).
    pub displacement: Vec<Vector3<f64>>,
    /// Per-vertex velocity (m/s); zero at equilibrium.
    pub velocity: Vec<Vector3<f64>>,
    /// Gauge pressure (Pa).
    pub pressure: f64,
    pub pattern: ClutchPattern,
    /// Norm of the out-of-balance force on free vertices (N).
    pub residual_norm: f64,
    /// Time since the start of a transient (s); zero for equilibria.
    pub time: f64,
}

impl DeformedState {
    pub fn rest(mesh: Arc<Mesh>, pattern: ClutchPattern) -> Self {
        let n = mesh.vertex_count();
        DeformedState {
            mesh,
            displacement: vec![Vector3::zeros(); n],
            velocity: vec![Vector3::zeros(); n],
            pressure: 0.0,
            pattern,
            residual_norm: 0.0,
            time: 0.0,
        }
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.mesh.vertices.iter().zip(&self.displacement).map(|(v, u)| v + u).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apex {
    pub vertex: usize,
    /// Deformed position (m).
    pub point: Vector3<f64>,
    /// Height above the clamping plane (m).
    pub height: f64,
}

/// Highest deformed vertex; ties go to the smallest radial distance, then
/// the lowest index.
pub fn apex(state: &DeformedState) -> Apex {
    let mut best: Option<(usize, Vector3<f64>)> = None;
    for (i, (v, u)) in state.mesh.vertices.iter().zip(&state.displacement).enumerate() {
        let p = v + u;
        let better = match best {
            None => true,
            Some((_, b)) => p.z > b.z || (p.z == b.z && p.xy().norm() < b.xy().norm()),
        };
        if better {
            best = Some((i, p));
        }
    }
    let (vertex, point) = best.unwrap_or((0, Vector3::zeros()));
    Apex { vertex, point, height: point.z }
}

/// Pre-processed finite-element model of one design at one resolution.
#[derive(Debug, Clone)]
pub struct MembraneModel {
    pub design: MembraneDesign,
    pub mesh: Arc<Mesh>,
    pub config: SolverConfig,
    rest: Vec<RestTriangle>,
    soft: Vec<bool>,
    tri_clutch: Vec<Option<ClutchId>>,
    free: Vec<bool>,
    lumped_mass: Vec<f64>,
    soft_law: Constitutive,
    stabilized_law: Constitutive,
    clutch_law: Constitutive,
    footprint_area: BTreeMap<ClutchId, f64>,
}

/// Membrane and plate at rest together.
#[derive(Debug, Clone)]
pub struct PlateEquilibrium {
    pub state: DeformedState,
    pub pose: PlatePose,
    /// Net force on the plate `[F_h (N), M_x (N·m), M_y (N·m)]`, where the
    /// moments are conjugate to the slopes. Near zero on free DoFs.
    pub generalized_force: [f64; 3],
}

/// Per-step convergence record.
#[derive(Debug, Clone, Copy)]
struct Relaxation {
    residual: f64,
    iterations: usize,
}

impl MembraneModel {
    pub fn new(design: &MembraneDesign, config: &SolverConfig) -> Result<Self, SolveError> {
        config.validate()?;
        let mesh = generate_mesh(design, config.mesh_edge_length)?;
        Ok(Self::with_mesh(design, config, Arc::new(mesh)))
    }

    pub fn with_mesh(design: &MembraneDesign, config: &SolverConfig, mesh: Arc<Mesh>) -> Self {
        let mut rest = Vec::with_capacity(mesh.triangle_count());
        let mut lumped_mass = vec![0.0; mesh.vertex_count()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|i| Vector2::new(mesh.vertices[i].x, mesh.vertices[i].y));
            let r = RestTriangle::new(p[0], p[1], p[2]).expect("mesh generator emits non-degenerate triangles");
            let density = design.material_for(mesh.region_of_triangle[t].material).density;
            let m = density * design.silicone_thickness * r.area / 3.0;
            for &i in tri {
                lumped_mass[i] += m;
            }
            rest.push(r);
        }
        let soft = mesh.region_of_triangle.iter().map(|r| r.material == RingMaterial::Soft).collect();
        let tri_clutch = mesh.region_of_triangle.iter().map(|r| r.clutch).collect();
        let free = (0..mesh.vertex_count()).map(|v| !mesh.is_boundary(v)).collect();
        let footprint_area = design.clutch_footprints.iter().map(|f| (f.id, f.area())).collect();
        MembraneModel {
            design: design.clone(),
            mesh,
            config: config.clone(),
            rest,
            soft,
            tri_clutch,
            free,
            lumped_mass,
            soft_law: Constitutive::from(&design.soft_material),
            stabilized_law: Constitutive::from(&design.stabilized_material),
            clutch_law: Constitutive::from(&design.clutch_material),
            footprint_area,
        }
    }

    fn base_law(&self, t: usize) -> &Constitutive {
        if self.soft[t] {
            &self.soft_law
        } else {
            &self.stabilized_law
        }
    }

    fn engaged_clutch(&self, t: usize, pattern: &ClutchPattern) -> Option<ClutchId> {
        self.tri_clutch[t].filter(|&c| pattern.is_engaged(c))
    }

    fn corners(&self, x: &[Vector3<f64>], t: usize) -> [Vector3<f64>; 3] {
        self.mesh.triangles[t].map(|i| x[i])
    }

    /// Internal (elastic) forces at positions `x`; returns the strain energy.
    pub fn internal_forces(&self, x: &[Vector3<f64>], pattern: &ClutchPattern, out: &mut [Vector3<f64>]) -> f64 {
        let eps = self.config.wrinkle_stiffness_factor;
        let t_sil = self.design.silicone_thickness;
        let t_clutch = self.design.clutch_thickness;
        let mut energy = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let xs = self.corners(x, t);
            let r = element_energy_and_forces(&self.rest[t], &xs, self.base_law(t), t_sil, eps);
            energy += r.energy;
            for k in 0..3 {
                out[tri[k]] += r.forces[k];
            }
            if self.engaged_clutch(t, pattern).is_some() {
                let c = element_energy_and_forces(&self.rest[t], &xs, &self.clutch_law, t_clutch, eps);
                energy += c.energy;
                for k in 0..3 {
                    out[tri[k]] += c.forces[k];
                }
            }
        }
        energy
    }

    /// Strain energy alone.
    pub fn strain_energy(&self, x: &[Vector3<f64>], pattern: &ClutchPattern) -> f64 {
        let mut scratch = vec![Vector3::zeros(); x.len()];
        self.internal_forces(x, pattern, &mut scratch)
    }

    /// Total nodal force (internal + pressure) with clamped vertices zeroed.
    /// Returns the strain energy.
    fn residual(&self, x: &[Vector3<f64>], pattern: &ClutchPattern, pressure: f64, out: &mut [Vector3<f64>]) -> f64 {
        out.iter_mut().for_each(|f| *f = Vector3::zeros());
        let energy = self.internal_forces(x, pattern, out);
        accumulate_pressure_forces(&self.mesh, x, pressure, out);
        for (f, &free) in out.iter_mut().zip(&self.free) {
            if !free {
                *f = Vector3::zeros();
            }
        }
        energy
    }

    /// Per-vertex stiffness estimate (N/m) at positions `x`.
    fn nodal_stiffness(&self, x: &[Vector3<f64>], pattern: &ClutchPattern, pressure: f64) -> Vec<f64> {
        let eps = self.config.wrinkle_stiffness_factor;
        let mut k = vec![0.0; x.len()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let xs = self.corners(x, t);
            let mut ke = element_stiffness_bound(&self.rest[t], &xs, self.base_law(t), self.design.silicone_thickness, eps);
            if self.engaged_clutch(t, pattern).is_some() {
                ke += element_stiffness_bound(&self.rest[t], &xs, &self.clutch_law, self.design.clutch_thickness, eps);
            }
            let perimeter = (xs[1] - xs[0]).norm() + (xs[2] - xs[1]).norm() + (xs[0] - xs[2]).norm();
            ke += pressure * perimeter;
            for &i in tri {
                k[i] += ke;
            }
        }
        k
    }

    /// Elastic force contributed by the laminate of each engaged clutch, and
    /// the resulting interfacial shear estimate: the summed magnitude of those
    /// forces over the footprint divided by the footprint's bonded area.
    pub fn clutch_constraint_forces(
        &self,
        x: &[Vector3<f64>],
        pattern: &ClutchPattern,
    ) -> (Vec<Vector3<f64>>, BTreeMap<ClutchId, f64>) {
        let eps = self.config.wrinkle_stiffness_factor;
        let n = x.len();
        let mut total = vec![Vector3::zeros(); n];
        let mut per_clutch: BTreeMap<ClutchId, Vec<Vector3<f64>>> = BTreeMap::new();
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let Some(c) = self.engaged_clutch(t, pattern) else { continue };
            let xs = self.corners(x, t);
            let r = element_energy_and_forces(&self.rest[t], &xs, &self.clutch_law, self.design.clutch_thickness, eps);
            let acc = per_clutch.entry(c).or_insert_with(|| vec![Vector3::zeros(); n]);
            for k in 0..3 {
                total[tri[k]] += r.forces[k];
                acc[tri[k]] += r.forces[k];
            }
        }
        let mut shear = BTreeMap::new();
        for c in pattern.active() {
            let area = self.footprint_area.get(&c).copied().unwrap_or(f64::INFINITY);
            let magnitude: f64 = per_clutch.get(&c).map(|f| f.iter().map(|v| v.norm()).sum()).unwrap_or(0.0);
            shear.insert(c, magnitude / area);
        }
        (total, shear)
    }

    /// Dynamic relaxation at fixed pressure and pattern, in place. An optional
    /// rigid plate is relaxed together with the membrane.
    #[allow(clippy::too_many_arguments)]
    fn relax(
        &self,
        x: &mut [Vector3<f64>],
        pattern: &ClutchPattern,
        pressure: f64,
        tol: f64,
        budget: usize,
        history: &mut Vec<f64>,
        mut plate: Option<&mut PlateSystem>,
    ) -> Relaxation {
        let n = x.len();
        let mut force = vec![Vector3::zeros(); n];
        let mut velocity = vec![Vector3::zeros(); n];
        let mut plate_v = [0.0; 3];
        let mut residual = self.coupled_residual(x, pattern, pressure, plate.as_deref_mut(), &mut force);
        // Grows on every divergence and persists across mass recomputations.
        let mut mass_scale = 1.0;
        let (mut mass, mut plate_mass) = self.coupled_masses(x, pattern, pressure, plate.as_deref(), mass_scale);
        let mut ke_prev = 0.0;
        let mut fresh = true;
        let mut best = residual;
        let mut best_x = x.to_vec();
        let mut best_q = plate.as_ref().map(|p| p.q).unwrap_or_default();
        let mut iterations = 0;
        let viscous = if self.config.kinetic_damping { 0.0 } else { self.config.viscous_damping.min(1.0) };
        loop {
            if iterations % 200 == 0 {
                history.push(residual);
            }
            if residual <= tol || iterations >= budget || !residual.is_finite() {
                return Relaxation { residual, iterations };
            }
            iterations += 1;

            let mut ke = 0.0;
            // After a reset the first step is a half step from rest.
            let h = if fresh { 0.5 } else { 1.0 };
            for i in 0..n {
                if !self.free[i] {
                    continue;
                }
                let v = velocity[i] * (1.0 - viscous) + force[i] * (h / mass[i]);
                velocity[i] = v;
                ke += 0.5 * mass[i] * v.norm_squared();
            }
            if let Some(p) = plate.as_deref() {
                for d in 0..3 {
                    if p.fixed[d] {
                        continue;
                    }
                    plate_v[d] = plate_v[d] * (1.0 - viscous) + p.force[d] * (h / plate_mass[d]);
                    ke += 0.5 * plate_mass[d] * plate_v[d] * plate_v[d];
                }
            }
            fresh = false;

            if self.config.kinetic_damping && ke < ke_prev {
                // Past the kinetic-energy peak: stay at the previous positions, restart from rest.
                velocity.iter_mut().for_each(|v| *v = Vector3::zeros());
                plate_v = [0.0; 3];
                ke_prev = 0.0;
                fresh = true;
                (mass, plate_mass) = self.coupled_masses(x, pattern, pressure, plate.as_deref(), mass_scale);
                if residual < best {
                    best = residual;
                    best_x.copy_from_slice(x);
                    best_q = plate.as_ref().map(|p| p.q).unwrap_or_default();
                }
                continue;
            }
            ke_prev = ke;
            for i in 0..n {
                x[i] += velocity[i];
            }
            if let Some(p) = plate.as_deref_mut() {
                for (q, v) in p.q.iter_mut().zip(plate_v) {
                    *q += v;
                }
            }
            residual = self.coupled_residual(x, pattern, pressure, plate.as_deref_mut(), &mut force);
            if !residual.is_finite() || residual > DIVERGENCE_RATIO * best.max(tol) {
                // The explicit update went unstable: return to the best state
                // seen and continue with heavier nodes.
                x.copy_from_slice(&best_x);
                if let Some(p) = plate.as_deref_mut() {
                    p.q = best_q;
                }
                velocity.iter_mut().for_each(|v| *v = Vector3::zeros());
                plate_v = [0.0; 3];
                mass_scale *= 4.0;
                ke_prev = 0.0;
                fresh = true;
                residual = self.coupled_residual(x, pattern, pressure, plate.as_deref_mut(), &mut force);
                (mass, plate_mass) = self.coupled_masses(x, pattern, pressure, plate.as_deref(), mass_scale);
            }
        }
    }

    fn coupled_residual(
        &self,
        x: &[Vector3<f64>],
        pattern: &ClutchPattern,
        pressure: f64,
        plate: Option<&mut PlateSystem>,
        out: &mut [Vector3<f64>],
    ) -> f64 {
        out.iter_mut().for_each(|f| *f = Vector3::zeros());
        self.internal_forces(x, pattern, out);
        accumulate_pressure_forces(&self.mesh, x, pressure, out);
        let plate_sq = match plate {
            Some(p) => {
                p.accumulate(x, out);
                p.residual_squared()
            }
            None => 0.0,
        };
        for (f, &free) in out.iter_mut().zip(&self.free) {
            if !free {
                *f = Vector3::zeros();
            }
        }
        (norm(out).powi(2) + plate_sq).sqrt()
    }

    fn coupled_masses(
        &self,
        x: &[Vector3<f64>],
        pattern: &ClutchPattern,
        pressure: f64,
        plate: Option<&PlateSystem>,
        scale: f64,
    ) -> (Vec<f64>, [f64; 3]) {
        let mut k = self.nodal_stiffness(x, pattern, pressure);
        let kq = plate.map(|p| p.stiffness(x, &mut k)).unwrap_or([1.0; 3]);
        // Unit pseudo time step; central differences are stable for m ≥ K/4.
        let m = 0.6 * scale;
        (k.into_iter().map(|k| m * k.max(1e-9)).collect(), kq.map(|k| m * k.max(1e-9)))
    }

    /// Ramps the pressure from the starting state to `pressure` and relaxes
    /// to equilibrium, releasing any clutch whose shear exceeds the slip
    /// threshold along the way.
    pub fn solve_equilibrium(
        &self,
        pattern: &ClutchPattern,
        pressure: f64,
        start: Option<&DeformedState>,
    ) -> Result<DeformedState, SolveError> {
        if !(pressure.is_finite() && pressure >= 0.0) {
            return Err(SolveError::Pressure(pressure));
        }
        let mut x: Vec<Vector3<f64>> = match start {
            Some(s) => s.positions(),
            None => self.mesh.vertices.clone(),
        };
        let p0 = start.map(|s| s.pressure).unwrap_or(0.0);
        let mut pattern = pattern.clone();
        let mut history = Vec::new();
        let mut used = 0;
        let steps = self.config.pressure_steps;
        let tol = self.config.residual_tol;
        let mut last = Relaxation { residual: 0.0, iterations: 0 };
        let mut step = 1;
        while step <= steps {
            let p = p0 + (pressure - p0) * step as f64 / steps as f64;
            let step_tol = if step == steps { tol } else { 10.0 * tol };
            last = self.relax(&mut x, &pattern, p, step_tol, self.config.max_iterations - used, &mut history, None);
            used += last.iterations;
            if last.residual > step_tol || !last.residual.is_finite() {
                let state = self.state_from_positions(&x, p, &pattern, last.residual);
                return Err(SolveError::NotConverged {
                    iterations: used,
                    residual: last.residual,
                    last_state: Box::new(state),
                    residual_history: history,
                });
            }
            let (_, shear) = self.clutch_constraint_forces(&x, &pattern);
            let slipped = check_slip(&pattern, &shear, self.config.slip_threshold);
            if slipped != pattern {
                // A clutch let go: re-solve this pressure level without it.
                pattern = slipped;
                continue;
            }
            step += 1;
        }
        let _ = last;
        let mut force = vec![Vector3::zeros(); x.len()];
        self.residual(&x, &pattern, pressure, &mut force);
        Ok(self.state_from_positions(&x, pressure, &pattern, norm(&force)))
    }

    /// Static equilibrium of the membrane carrying a rigid plate at a single
    /// pressure level. With `fixed_slope` the plate tilt is held and the
    /// reaction moment is reported in `generalized_force`.
    pub fn solve_with_plate(
        &self,
        pattern: &ClutchPattern,
        pressure: f64,
        plate: &RigidPlate,
        start: Option<(&DeformedState, PlatePose)>,
        fixed_slope: Option<Vector2<f64>>,
    ) -> Result<PlateEquilibrium, SolveError> {
        if !(pressure.is_finite() && pressure >= 0.0) {
            return Err(SolveError::Pressure(pressure));
        }
        if !(plate.mass > 0.0 && plate.half_extent > 0.0 && plate.contact_stiffness > 0.0) {
            return Err(SolveError::Config(format!("invalid plate {plate:?}")));
        }
        let (mut x, mut pose) = match start {
            Some((s, pose)) => (s.positions(), pose),
            None => {
                let free = self.solve_equilibrium(pattern, pressure, None)?;
                let top = apex(&free).height;
                (free.positions(), PlatePose { height: top, slope: Vector2::zeros() })
            }
        };
        if let Some(s) = fixed_slope {
            pose.slope = s;
        }
        let fixed = [false, fixed_slope.is_some(), fixed_slope.is_some()];
        let mut area = vec![0.0; x.len()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            for &i in tri {
                area[i] += self.rest[t].area / 3.0;
            }
        }
        let mut system = PlateSystem::new(*plate, pose, fixed, &self.mesh.vertices, &area, self.design.radius);
        let mut pattern = pattern.clone();
        let mut history = Vec::new();
        let mut used = 0;
        let tol = self.config.residual_tol;
        loop {
            let r = self.relax(&mut x, &pattern, pressure, tol, self.config.max_iterations - used, &mut history, Some(&mut system));
            used += r.iterations;
            if r.residual > tol || !r.residual.is_finite() {
                let state = self.state_from_positions(&x, pressure, &pattern, r.residual);
                return Err(SolveError::NotConverged {
                    iterations: used,
                    residual: r.residual,
                    last_state: Box::new(state),
                    residual_history: history,
                });
            }
            let (_, shear) = self.clutch_constraint_forces(&x, &pattern);
            let slipped = check_slip(&pattern, &shear, self.config.slip_threshold);
            if slipped == pattern {
                let state = self.state_from_positions(&x, pressure, &pattern, r.residual);
                return Ok(PlateEquilibrium { state, pose: system.pose(), generalized_force: system.force });
            }
            pattern = slipped;
        }
    }

    fn state_from_positions(&self, x: &[Vector3<f64>], pressure: f64, pattern: &ClutchPattern, residual: f64) -> DeformedState {
        let displacement = x
            .iter()
            .zip(&self.mesh.vertices)
            .zip(&self.free)
            .map(|((p, v), &free)| if free { p - v } else { Vector3::zeros() })
            .collect();
        DeformedState {
            mesh: Arc::clone(&self.mesh),
            displacement,
            velocity: vec![Vector3::zeros(); x.len()],
            pressure,
            pattern: pattern.clone(),
            residual_norm: residual,
            time: 0.0,
        }
    }

    /// Total mechanical energy: kinetic + strain − pressure work.
    pub fn total_energy(&self, state: &DeformedState) -> f64 {
        let x = state.positions();
        let kinetic: f64 = state
            .velocity
            .iter()
            .zip(&self.lumped_mass)
            .map(|(v, m)| 0.5 * m * v.norm_squared())
            .sum();
        kinetic + self.strain_energy(&x, &state.pattern) - state.pressure * enclosed_volume(&self.mesh, &x)
    }

    /// Largest stable explicit step (s) for the physical masses at `x`.
    pub fn stable_dt(&self, x: &[Vector3<f64>], pattern: &ClutchPattern, pressure: f64) -> f64 {
        let k = self.nodal_stiffness(x, pattern, pressure);
        let omega2 = k
            .iter()
            .zip(&self.lumped_mass)
            .zip(&self.free)
            .filter(|(_, &free)| free)
            .map(|((k, m), _)| k / m)
            .fold(0.0, f64::max);
        2.0 / omega2.sqrt()
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    /// Explicit, viscously damped time integration after a clutch release.
    /// Frames are emitted every `frame_interval`, starting with the input.
    pub fn dynamic_transient(
        &self,
        state: &DeformedState,
        event: &ClutchEvent,
        duration: f64,
    ) -> Result<Vec<DeformedState>, SolveError> {
        if event.transition != Transition::Deactivate {
            return Err(SolveError::NotADeactivation(event.transition));
        }
        let pattern = apply_event(&state.pattern, event)?;
        self.transient_frames(state, pattern, duration)
    }

    /// Free response of `state` under `pattern` for `duration`, framed like
    /// [`MembraneModel::dynamic_transient`].
    pub fn transient_frames(
        &self,
        state: &DeformedState,
        pattern: ClutchPattern,
        duration: f64,
    ) -> Result<Vec<DeformedState>, SolveError> {
        let mut frames = vec![state.clone()];
        if !(duration > 0.0) {
            return Ok(frames);
        }
        let mut sim = TransientStepper::new(self, state, pattern);
        let interval = self.config.frame_interval;
        let mut next_frame = interval;
        while sim.time < duration - 1e-12 {
            let target = next_frame.min(duration);
            sim.advance_to(target)?;
            frames.push(sim.snapshot());
            next_frame += interval;
        }
        Ok(frames)
    }
}

/// Explicit integrator state shared by transient consumers.
pub struct TransientStepper<'a> {
    model: &'a MembraneModel,
    pub x: Vec<Vector3<f64>>,
    pub v: Vec<Vector3<f64>>,
    force: Vec<Vector3<f64>>,
    pub pattern: ClutchPattern,
    pub pressure: f64,
    pub time: f64,
    pub step: usize,
    dt: f64,
    steps_since_dt: usize,
}

impl<'a> TransientStepper<'a> {
    pub fn new(model: &'a MembraneModel, state: &DeformedState, pattern: ClutchPattern) -> Self {
        let x = state.positions();
        let mut force = vec![Vector3::zeros(); x.len()];
        model.residual(&x, &pattern, state.pressure, &mut force);
        let mut s = TransientStepper {
            model,
            v: state.velocity.clone(),
            x,
            force,
            pattern,
            pressure: state.pressure,
            time: state.time,
            step: 0,
            dt: model.config.dt,
            steps_since_dt: 0,
        };
        s.update_dt();
        s
    }

    fn update_dt(&mut self) {
        self.steps_since_dt = 0;
        self.dt = if self.model.config.adaptive_dt {
            self.model.config.dt.min(0.7 * self.model.stable_dt(&self.x, &self.pattern, self.pressure))
        } else {
            self.model.config.dt
        };
    }

    /// Acceleration of a vertex under the current forces and damping.
    pub fn acceleration(&self, vertex: usize) -> Vector3<f64> {
        let m = &self.model;
        self.force[vertex] / m.lumped_mass[vertex] - m.config.viscous_damping * self.v[vertex]
    }

    /// One explicit step of at most `max_dt`.
    pub fn step(&mut self, max_dt: f64) -> Result<(), SolveError> {
        if self.steps_since_dt >= 200 {
            self.update_dt();
        }
        let dt = self.dt.min(max_dt);
        let c = self.model.config.viscous_damping;
        let keep = (1.0 - 0.5 * c * dt) / (1.0 + 0.5 * c * dt);
        let gain = dt / (1.0 + 0.5 * c * dt);
        for i in 0..self.x.len() {
            if !self.model.free[i] {
                continue;
            }
            self.v[i] = self.v[i] * keep + self.force[i] * (gain / self.model.lumped_mass[i]);
            self.x[i] += self.v[i] * dt;
        }
        self.step += 1;
        self.steps_since_dt += 1;
        self.time += dt;
        self.model.residual(&self.x, &self.pattern, self.pressure, &mut self.force);
        if self.x.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SolveError::Unstable { step: self.step, time: self.time });
        }
        Ok(())
    }

    pub fn advance_to(&mut self, t: f64) -> Result<(), SolveError> {
        while self.time < t - 1e-12 {
            self.step(t - self.time)?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> DeformedState {
        let m = self.model;
        let displacement = self.x.iter().zip(&m.mesh.vertices).map(|(p, v)| p - v).collect();
        let free_force: Vec<_> = self.force.clone();
        DeformedState {
            mesh: Arc::clone(&m.mesh),
            displacement,
            velocity: self.v.clone(),
            pressure: self.pressure,
            pattern: self.pattern.clone(),
            residual_norm: norm(&free_force),
            time: self.time,
        }
    }
}

/// A relaxation step whose residual grows this much past the last restart is
/// treated as numerical divergence.
const DIVERGENCE_RATIO: f64 = 1e3;

fn norm(f: &[Vector3<f64>]) -> f64 {
    f.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

/// Builds a model and solves one equilibrium from the flat state.
pub fn solve_equilibrium(
    design: &MembraneDesign,
    pattern: &ClutchPattern,
    pressure: f64,
    config: &SolverConfig,
) -> Result<DeformedState, SolveError> {
    MembraneModel::new(design, config)?.solve_equilibrium(pattern, pressure, None)
}
