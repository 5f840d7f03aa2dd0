//! Triangulation of the clamped disk.
//!
//! Vertices are placed on concentric circles whose radii include every ring
//! boundary, so ring areas converge quadratically. Each circle carries a
//! multiple of eight equally spaced vertices and the circle-to-circle strips
//! are zipped one quadrant at a time, which makes the mesh exactly invariant
//! under quarter turns about z.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::design::{DesignError, MembraneDesign, RegionTag};

/// Ratio of layer spacing to the requested maximum edge length.
const SPACING_RATIO: f64 = 0.7;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("target edge length {edge} must lie in (0, radius/4 = {limit})")]
    EdgeLength { edge: f64, limit: f64 },
    #[error("mesh export: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub region_of_triangle: Vec<RegionTag>,
    /// Clamped rim vertices, ascending.
    pub boundary_vertices: Vec<usize>,
    /// Index of the first vertex of each circle (the origin is circle 0).
    circle_starts: Vec<usize>,
}

pub fn generate_mesh(design: &MembraneDesign, target_edge_length: f64) -> Result<Mesh, MeshError> {
    design.validate()?;
    let limit = design.radius / 4.0;
    if !(target_edge_length > 0.0 && target_edge_length < limit) {
        return Err(MeshError::EdgeLength { edge: target_edge_length, limit });
    }
    let spacing = SPACING_RATIO * target_edge_length;

    let mut radii = vec![0.0];
    for ring in &design.rings {
        let segments = (ring.width() / spacing).ceil().max(1.0) as usize;
        for k in 1..=segments {
            radii.push(ring.inner + ring.width() * k as f64 / segments as f64);
        }
    }
    // Snap the last circle onto the rim exactly.
    if let Some(last) = radii.last_mut() {
        *last = design.radius;
    }

    let counts: Vec<usize> = radii
        .iter()
        .map(|&r| {
            if r == 0.0 {
                1
            } else {
                let n = (2.0 * PI * r / spacing).ceil() as usize;
                n.div_ceil(8).max(1) * 8
            }
        })
        .collect();

    let mut vertices = Vec::with_capacity(counts.iter().sum());
    let mut circle_starts = Vec::with_capacity(radii.len());
    for (&r, &n) in radii.iter().zip(&counts) {
        circle_starts.push(vertices.len());
        if n == 1 {
            vertices.push(Vector3::zeros());
            continue;
        }
        let quarter = n / 4;
        for q in 0..4 {
            for j in 0..quarter {
                let local = circle_point(r, n, j);
                let p = rotate_quarters(local, q);
                vertices.push(Vector3::new(p.x, p.y, 0.0));
            }
        }
    }

    let mut triangles = Vec::new();
    // Center fan.
    let first = circle_starts[1];
    let n1 = counts[1];
    for j in 0..n1 {
        triangles.push([0, first + j, first + (j + 1) % n1]);
    }
    for k in 1..radii.len() - 1 {
        zip_strip(
            &mut triangles,
            (circle_starts[k], counts[k], radii[k]),
            (circle_starts[k + 1], counts[k + 1], radii[k + 1]),
        );
    }

    let region_of_triangle = triangles
        .iter()
        .map(|t| {
            let c = (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
            design.region_lookup(c.x, c.y)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rim = *circle_starts.last().unwrap_or(&0);
    let boundary_vertices = (rim..vertices.len()).collect();

    Ok(Mesh { vertices, triangles, region_of_triangle, boundary_vertices, circle_starts })
}

fn circle_point(r: f64, n: usize, j: usize) -> Vector2<f64> {
    let phi = 2.0 * PI * j as f64 / n as f64;
    Vector2::new(r * phi.cos(), r * phi.sin())
}

fn rotate_quarters(p: Vector2<f64>, q: usize) -> Vector2<f64> {
    match q % 4 {
        0 => p,
        1 => Vector2::new(-p.y, p.x),
        2 => Vector2::new(-p.x, -p.y),
        _ => Vector2::new(p.y, -p.x),
    }
}

/// Triangulates the strip between two circles, one quadrant at a time.
/// Diagonal choices are made in quadrant-local coordinates so every quadrant
/// gets the same connectivity.
fn zip_strip(
    out: &mut Vec<[usize; 3]>,
    (in_start, in_n, in_r): (usize, usize, f64),
    (out_start, out_n, out_r): (usize, usize, f64),
) {
    let (qi, qo) = (in_n / 4, out_n / 4);
    let inner_local = |j: usize| circle_point(in_r, in_n, j);
    let outer_local = |j: usize| circle_point(out_r, out_n, j);
    for q in 0..4 {
        let inner_idx = |j: usize| in_start + (q * qi + j) % in_n;
        let outer_idx = |j: usize| out_start + (q * qo + j) % out_n;
        let (mut a, mut b) = (0, 0);
        while a < qi || b < qo {
            let advance_inner = if a == qi {
                false
            } else if b == qo {
                true
            } else {
                let d_inner = (inner_local(a + 1) - outer_local(b)).norm_squared();
                let d_outer = (inner_local(a) - outer_local(b + 1)).norm_squared();
                d_inner <= d_outer
            };
            if advance_inner {
                out.push([inner_idx(a), outer_idx(b), inner_idx(a + 1)]);
                a += 1;
            } else {
                out.push([inner_idx(a), outer_idx(b), outer_idx(b + 1)]);
                b += 1;
            }
        }
    }
}

impl Mesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v >= *self.circle_starts.last().unwrap_or(&usize::MAX)
    }

    /// Rest-state area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Summed rest area of every triangle in ring `ring`.
    pub fn ring_area(&self, ring: usize) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.region_of_triangle[t].ring == ring)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Maps each vertex to the vertex it lands on after a +90° rotation about z.
    pub fn quarter_turn_map(&self) -> Vec<usize> {
        let mut map = Vec::with_capacity(self.vertices.len());
        for (c, &start) in self.circle_starts.iter().enumerate() {
            let end = self.circle_starts.get(c + 1).copied().unwrap_or(self.vertices.len());
            let n = end - start;
            for j in 0..n {
                map.push(start + (j + n / 4) % n);
            }
        }
        map
    }

    /// Maps each vertex to its mirror image under `x -> -x`.
    pub fn mirror_x_map(&self) -> Vec<usize> {
        let mut map = Vec::with_capacity(self.vertices.len());
        for (c, &start) in self.circle_starts.iter().enumerate() {
            let end = self.circle_starts.get(c + 1).copied().unwrap_or(self.vertices.len());
            let n = end - start;
            // Angle index j maps to the index of π − θ, i.e. n/2 − j.
            for j in 0..n {
                map.push(start + (n / 2 + n - j) % n);
            }
        }
        map
    }

    /// Edges used by exactly one triangle, as sorted vertex pairs.
    pub fn open_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut open: Vec<_> = count.into_iter().filter(|&(_, n)| n == 1).map(|(e, _)| e).collect();
        open.sort_unstable();
        open
    }

    /// Writes the mesh (optionally displaced) as ASCII PLY with a per-face
    /// integer `region` property (see [`RegionTag::code`]).
    pub fn write_ply<W: Write>(&self, mut w: W, displacement: Option<&[Vector3<f64>]>) -> std::io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "comment region = ring index + 100 * (clutch index + 1) when clutch-covered")?;
        writeln!(w, "element vertex {}", self.vertices.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        writeln!(w, "element face {}", self.triangles.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "property int region")?;
        writeln!(w, "end_header")?;
        for (i, v) in self.vertices.iter().enumerate() {
            let p = match displacement {
                Some(u) => v + u[i],
                None => *v,
            };
            writeln!(w, "{:e} {:e} {:e}", p.x, p.y, p.z)?;
        }
        for (t, tag) in self.triangles.iter().zip(&self.region_of_triangle) {
            writeln!(w, "3 {} {} {} {}", t[0], t[1], t[2], tag.code())?;
        }
        Ok(())
    }

    pub fn save_ply(&self, path: impl AsRef<Path>, displacement: Option<&[Vector3<f64>]>) -> Result<(), MeshError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_ply(file, displacement)?;
        Ok(())
    }
}

/// Rotates a vector by `quarters` × 90° about z.
pub fn rotate_z_quarters(v: Vector3<f64>, quarters: usize) -> Vector3<f64> {
    let p = rotate_quarters(Vector2::new(v.x, v.y), quarters);
    Vector3::new(p.x, p.y, v.z)
}
