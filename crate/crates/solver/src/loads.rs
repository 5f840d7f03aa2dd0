//! Follower pressure load on the deformed surface.

use nalgebra::Vector3;

use membrane_core::mesh::Mesh;

/// Nodal forces of a gauge pressure acting normal to the deformed surface.
/// Each triangle contributes `p · (deformed area vector)` split equally over
/// its three vertices. `positions` are current (not displaced) coordinates.
pub fn pressure_forces(mesh: &Mesh, positions: &[Vector3<f64>], pressure: f64) -> Vec<Vector3<f64>> {
    let mut out = vec![Vector3::zeros(); positions.len()];
    accumulate_pressure_forces(mesh, positions, pressure, &mut out);
    out
}

pub(crate) fn accumulate_pressure_forces(mesh: &Mesh, positions: &[Vector3<f64>], pressure: f64, out: &mut [Vector3<f64>]) {
    if pressure == 0.0 {
        return;
    }
    let k = pressure / 6.0;
    for t in &mesh.triangles {
        let (a, b, c) = (positions[t[0]], positions[t[1]], positions[t[2]]);
        // Area vector is half the cross product; a third goes to each vertex.
        let f = (b - a).cross(&(c - a)) * k;
        out[t[0]] += f;
        out[t[1]] += f;
        out[t[2]] += f;
    }
}

/// Volume enclosed between the membrane and the clamping plane. Its gradient
/// with respect to any free vertex equals the pressure force per unit
/// pressure, so `−p·V` is the load potential.
pub fn enclosed_volume(mesh: &Mesh, positions: &[Vector3<f64>]) -> f64 {
    mesh.triangles
        .iter()
        .map(|t| positions[t[0]].dot(&positions[t[1]].cross(&positions[t[2]])))
        .sum::<f64>()
        / 6.0
}
