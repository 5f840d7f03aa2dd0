//! Surface decimation for streaming.
//!
//! Vertices are clustered on a square grid over the flat rest mesh, so the
//! cluster map is computed once per session and every streamed frame shares
//! the same connectivity.

use std::collections::BTreeMap;

use membrane_core::mesh::Mesh;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub const MAX_STREAM_VERTICES: usize = 5000;

/// A triangle surface in wire form. Coordinates are metres, rounded to f32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub vertices: Vec<[f32; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decimation {
    /// Source vertex shown for each output vertex.
    representative: Vec<usize>,
    triangles: Vec<[u32; 3]>,
}

impl Decimation {
    pub fn new(mesh: &Mesh, max_vertices: usize) -> Self {
        let n = mesh.vertex_count();
        if n <= max_vertices {
            return Decimation {
                representative: (0..n).collect(),
                triangles: mesh.triangles.iter().map(|t| t.map(|i| i as u32)).collect(),
            };
        }
        let mut cell = (mesh.total_area() / max_vertices as f64).sqrt();
        loop {
            if let Some(d) = Self::cluster(mesh, cell, max_vertices) {
                return d;
            }
            cell *= 1.1;
        }
    }

    fn cluster(mesh: &Mesh, cell: f64, max_vertices: usize) -> Option<Self> {
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, v) in mesh.vertices.iter().enumerate() {
            let key = ((v.x / cell).floor() as i64, (v.y / cell).floor() as i64);
            cells.entry(key).or_default().push(i);
        }
        if cells.len() > max_vertices {
            return None;
        }
        let mut remap = vec![0u32; mesh.vertex_count()];
        let mut representative = Vec::with_capacity(cells.len());
        for (k, members) in cells.values().enumerate() {
            // Boundary vertices win so the clamped rim stays on the outline.
            let mean = members.iter().map(|&i| mesh.vertices[i]).sum::<Vector3<f64>>() / members.len() as f64;
            let pick = members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let key = |i: usize| (!mesh.is_boundary(i), (mesh.vertices[i] - mean).norm());
                    let (ka, kb) = (key(a), key(b));
                    ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
                })
                .expect("cells are non-empty");
            representative.push(pick);
            for &i in members {
                remap[i] = k as u32;
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut triangles = Vec::new();
        for t in &mesh.triangles {
            let m = t.map(|i| remap[i]);
            if m[0] == m[1] || m[1] == m[2] || m[0] == m[2] {
                continue;
            }
            let mut key = m;
            key.sort_unstable();
            if seen.insert(key) {
                triangles.push(m);
            }
        }
        Some(Decimation { representative, triangles })
    }

    pub fn vertex_count(&self) -> usize {
        self.representative.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn surface(&self, positions: &[Vector3<f64>]) -> Surface {
        Surface {
            vertices: self
                .representative
                .iter()
                .map(|&i| {
                    let p = positions[i];
                    [p.x as f32, p.y as f32, p.z as f32]
                })
                .collect(),
            triangles: self.triangles.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use membrane_core::design::build_default_design;
    use membrane_core::mesh::generate_mesh;

    #[test]
    fn small_meshes_pass_through() {
        let mesh = generate_mesh(&build_default_design(), 0.01).unwrap();
        let d = Decimation::new(&mesh, MAX_STREAM_VERTICES);
        assert_eq!(d.vertex_count(), mesh.vertex_count());
        assert_eq!(d.triangle_count(), mesh.triangle_count());
        let s = d.surface(&mesh.vertices);
        let v = mesh.vertices[5];
        assert_eq!(s.vertices[5], [v.x as f32, v.y as f32, v.z as f32]);
    }

    #[test]
    fn fine_meshes_are_clustered_under_the_cap() {
        let mesh = generate_mesh(&build_default_design(), 0.0015).unwrap();
        assert!(mesh.vertex_count() > MAX_STREAM_VERTICES);
        let d = Decimation::new(&mesh, MAX_STREAM_VERTICES);
        assert!(d.vertex_count() <= MAX_STREAM_VERTICES);
        assert!(d.vertex_count() > MAX_STREAM_VERTICES / 3, "{}", d.vertex_count());
        let s = d.surface(&mesh.vertices);
        assert!(s.triangles.iter().flatten().all(|&i| (i as usize) < s.vertices.len()));
        // The decimated disk keeps most of its area.
        let area: f64 = s
            .triangles
            .iter()
            .map(|t| {
                let p = t.map(|i| Vector3::from(s.vertices[i as usize]).cast::<f64>());
                0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
            })
            .sum();
        assert!((area / mesh.total_area() - 1.0).abs() < 0.05, "{area}");
    }
}
