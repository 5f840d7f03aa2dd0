//! Quasi-static payload displacement per motion direction.
//!
//! The payload is placed on the centre of the flat membrane and held by
//! friction, so it stays on the material patch beneath it: its centre sits
//! one radius above the patch along the patch normal.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::direction::DoFDirection;
use crate::launch::Payload;
use crate::ActuationError;
use clutch_driver::ClutchState;
use inflation_solver::{DeformedState, MembraneModel};
use membrane_core::design::ClutchId;
use membrane_core::mesh::Mesh;

/// Radius of the membrane patch under the payload (m).
pub const DEFAULT_PATCH_RADIUS: f64 = 0.01;

/// Material patch of membrane under the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub vertices: Vec<usize>,
    /// Triangles with every corner in the patch.
    pub triangles: Vec<[usize; 3]>,
}

impl Patch {
    /// Free vertices within `radius` of `centre` in the flat configuration;
    /// at least the seven nearest.
    pub fn around(mesh: &Mesh, centre: Vector3<f64>, radius: f64) -> Self {
        let x = &mesh.vertices;
        let mut order: Vec<usize> = (0..x.len()).filter(|&i| !mesh.is_boundary(i)).collect();
        order.sort_by(|&a, &b| (x[a] - centre).norm().total_cmp(&(x[b] - centre).norm()).then(a.cmp(&b)));
        let inside = order.iter().take_while(|&&i| (x[i] - centre).norm() <= radius).count();
        let mut vertices: Vec<usize> = order.into_iter().take(inside.max(7)).collect();
        vertices.sort_unstable();
        let triangles = mesh
            .triangles
            .iter()
            .copied()
            .filter(|t| t.iter().all(|i| vertices.binary_search(i).is_ok()))
            .collect();
        Patch { vertices, triangles }
    }

    pub fn mean(&self, field: &[Vector3<f64>]) -> Vector3<f64> {
        self.vertices.iter().map(|&i| field[i]).sum::<Vector3<f64>>() / self.vertices.len() as f64
    }

    /// Area-weighted normal, oriented upward.
    pub fn normal(&self, x: &[Vector3<f64>]) -> Vector3<f64> {
        let n: Vector3<f64> = self.triangles.iter().map(|t| (x[t[1]] - x[t[0]]).cross(&(x[t[2]] - x[t[0]]))).sum();
        let n = if n.z < 0.0 { -n } else { n };
        n.try_normalize(1e-300).unwrap_or_else(Vector3::z)
    }

    /// Centre of a ball of `radius` resting on the patch at positions `x`.
    pub fn ball_centre(&self, x: &[Vector3<f64>], radius: f64) -> Vector3<f64> {
        self.mean(x) + self.normal(x) * radius
    }
}

/// Centre of the payload placed at the middle of the membrane, in `state`.
pub fn payload_position(state: &DeformedState, payload: &Payload) -> Vector3<f64> {
    let patch = Patch::around(&state.mesh, Vector3::zeros(), DEFAULT_PATCH_RADIUS);
    patch.ball_centre(&state.positions(), 0.5 * payload.diameter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceEntry {
    pub direction: DoFDirection,
    /// Payload centre minus its position on the flat membrane (m).
    pub displacement: Option<Vector3<f64>>,
    /// Horizontal part of `displacement` (m).
    pub lateral: Option<f64>,
    /// Clutches that let go during the solve.
    pub slipped: Vec<ClutchId>,
    pub error: Option<String>,
}

impl WorkspaceEntry {
    pub fn is_flagged(&self) -> bool {
        !self.slipped.is_empty() || self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceResult {
    /// Pa
    pub pressure: f64,
    pub entries: BTreeMap<DoFDirection, WorkspaceEntry>,
}

/// [`mode1_workspace_with`] for the default 40 mm ball.
pub fn mode1_workspace(
    model: &MembraneModel,
    pressure: f64,
    directions: &[DoFDirection],
) -> Result<WorkspaceResult, ActuationError> {
    mode1_workspace_with(model, pressure, directions, &Payload::default())
}

/// Inflates from flat to `pressure` once per direction and reports how far
/// the payload moved. Slips and solver failures flag the direction; the
/// other directions are still reported.
pub fn mode1_workspace_with(
    model: &MembraneModel,
    pressure: f64,
    directions: &[DoFDirection],
    payload: &Payload,
) -> Result<WorkspaceResult, ActuationError> {
    if !(pressure.is_finite() && pressure > 0.0) {
        return Err(ActuationError::Invalid(format!("workspace pressure must be positive, got {pressure}")));
    }
    if !(payload.diameter > 0.0) {
        return Err(ActuationError::Invalid(format!("payload diameter {}", payload.diameter)));
    }
    let flat = payload_position(&DeformedState::rest(model.mesh.clone(), DoFDirection::Up.pattern()), payload);
    let mut entries = BTreeMap::new();
    for &direction in directions {
        let entry = match model.solve_equilibrium(&direction.pattern(), pressure, None) {
            Ok(state) => {
                let d = payload_position(&state, payload) - flat;
                let slipped = ClutchId::ALL
                    .into_iter()
                    .filter(|&c| state.pattern.state(c) == ClutchState::Slipped)
                    .collect();
                WorkspaceEntry { direction, displacement: Some(d), lateral: Some(d.xy().norm()), slipped, error: None }
            }
            Err(e) => WorkspaceEntry { direction, displacement: None, lateral: None, slipped: vec![], error: Some(e.to_string()) },
        };
        entries.insert(direction, entry);
    }
    Ok(WorkspaceResult { pressure, entries })
}
