//! Constant-strain triangular membrane element.

use nalgebra::{Matrix2, Matrix3x2, Vector2, Vector3};

use crate::material::{Constitutive, MembraneState};

/// Stretches below this are clamped and the element is flagged degenerate.
const MIN_STRETCH: f64 = 1e-6;

/// Reference geometry of a triangle lying in the z = 0 plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestTriangle {
    /// Inverse of the rest edge matrix `[X1 − X0, X2 − X0]`.
    pub dm_inv: Matrix2<f64>,
    pub area: f64,
}

impl RestTriangle {
    pub fn new(p0: Vector2<f64>, p1: Vector2<f64>, p2: Vector2<f64>) -> Option<Self> {
        let dm = Matrix2::from_columns(&[p1 - p0, p2 - p0]);
        let det = dm.determinant();
        if det.abs() < 1e-18 {
            return None;
        }
        Some(RestTriangle { dm_inv: dm.try_inverse()?, area: 0.5 * det.abs() })
    }

    /// Shape-function gradients of the three nodes.
    pub fn shape_gradients(&self) -> [Vector2<f64>; 3] {
        let g1 = Vector2::new(self.dm_inv[(0, 0)], self.dm_inv[(0, 1)]);
        let g2 = Vector2::new(self.dm_inv[(1, 0)], self.dm_inv[(1, 1)]);
        [-(g1 + g2), g1, g2]
    }

    /// `Σ |∇Nₐ|²`, the geometric factor of the element stiffness.
    pub fn gradient_norm_sum(&self) -> f64 {
        self.shape_gradients().iter().map(|g| g.norm_squared()).sum()
    }

    pub fn deformation_gradient(&self, x: &[Vector3<f64>; 3]) -> Matrix3x2<f64> {
        Matrix3x2::from_columns(&[x[1] - x[0], x[2] - x[0]]) * self.dm_inv
    }
}

/// Principal stretches and directions of a 3×2 deformation gradient.
#[derive(Debug, Clone, Copy)]
pub struct PrincipalStretches {
    pub l1: f64,
    pub l2: f64,
    /// Reference-frame direction of `l1`; `l2` is its perpendicular.
    pub n1: Vector2<f64>,
}

impl PrincipalStretches {
    pub fn from_gradient(f: &Matrix3x2<f64>) -> Self {
        let c = f.transpose() * f;
        let (c11, c12, c22) = (c[(0, 0)], c[(0, 1)], c[(1, 1)]);
        let mean = 0.5 * (c11 + c22);
        let half = 0.5 * (c11 - c22);
        let disc = (half * half + c12 * c12).sqrt();
        let e1 = mean + disc;
        let e2 = (mean - disc).max(0.0);
        let n1 = if disc <= 1e-14 * mean.abs().max(1e-300) {
            Vector2::new(1.0, 0.0)
        } else {
            let a = Vector2::new(c12, e1 - c11);
            let b = Vector2::new(e1 - c22, c12);
            if a.norm_squared() >= b.norm_squared() { a.normalize() } else { b.normalize() }
        };
        PrincipalStretches { l1: e1.sqrt(), l2: e2.sqrt(), n1 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ElementResult {
    /// J
    pub energy: f64,
    /// N, one per node; the negative energy gradient.
    pub forces: [Vector3<f64>; 3],
    pub state: MembraneState,
    /// Set when a principal stretch collapsed (inverted or flattened triangle).
    pub degenerate: bool,
}

/// Strain energy and nodal forces of one membrane triangle of the given
/// thickness, under the tension-field relaxed law.
pub fn element_energy_and_forces(
    rest: &RestTriangle,
    x: &[Vector3<f64>; 3],
    law: &Constitutive,
    thickness: f64,
    wrinkle_factor: f64,
) -> ElementResult {
    let f = rest.deformation_gradient(x);
    let p = PrincipalStretches::from_gradient(&f);
    let degenerate = p.l2 < MIN_STRETCH;
    let l1 = p.l1.max(MIN_STRETCH);
    let l2 = p.l2.max(MIN_STRETCH);
    let (w, state) = law.membrane(l1, l2, wrinkle_factor);

    let n1 = p.n1;
    let n2 = Vector2::new(-n1.y, n1.x);
    // Second Piola-Kirchhoff stress in the principal frame.
    let s = n1 * n1.transpose() * (w.d1 / l1) + n2 * n2.transpose() * (w.d2 / l2);
    let scale = thickness * rest.area;
    let grad = f * s * rest.dm_inv.transpose() * scale;
    let g1: Vector3<f64> = grad.column(0).into();
    let g2: Vector3<f64> = grad.column(1).into();
    ElementResult {
        energy: scale * w.energy,
        forces: [g1 + g2, -g1, -g2],
        state,
        degenerate,
    }
}

/// Stiffness estimate (N/m) of the element in its current configuration.
pub fn element_stiffness_bound(
    rest: &RestTriangle,
    x: &[Vector3<f64>; 3],
    law: &Constitutive,
    thickness: f64,
    wrinkle_factor: f64,
) -> f64 {
    let f = rest.deformation_gradient(x);
    let p = PrincipalStretches::from_gradient(&f);
    let l1 = p.l1.max(MIN_STRETCH);
    let l2 = p.l2.max(MIN_STRETCH);
    let tangent = law
        .tangent_bound(l1, l2, wrinkle_factor)
        .max(law.initial_modulus() * wrinkle_factor);
    thickness * rest.area * rest.gradient_norm_sum() * tangent * l1.max(1.0).powi(2)
}
