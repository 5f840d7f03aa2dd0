//! Rigid plate resting on the membrane through penalty contact.
//!
//! The plate is the plane `z = h + sx·x + sy·y` over the square
//! `|x|, |y| ≤ half_extent`, centred on the actuator axis. Membrane vertices
//! above that plane are pushed down; plate points outside the clamped radius
//! rest on the chamber top at `z = 0`. Friction is ignored.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;

/// Plate sample points per side used for the chamber-top support.
const RIM_SAMPLES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPlate {
    /// kg
    pub mass: f64,
    /// Half the side of the square plate (m).
    pub half_extent: f64,
    /// Penalty stiffness per unit contact area (N/m³).
    pub contact_stiffness: f64,
}

impl RigidPlate {
    pub fn new(mass: f64, half_extent: f64) -> Self {
        RigidPlate { mass, half_extent, contact_stiffness: 5e7 }
    }

    /// Moment of inertia about an in-plane axis through the centre (kg·m²).
    pub fn roll_inertia(&self) -> f64 {
        self.mass * self.half_extent * self.half_extent / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlatePose {
    /// Height of the plate plane on the axis (m).
    pub height: f64,
    /// `(∂z/∂x, ∂z/∂y)` of the plate plane.
    pub slope: Vector2<f64>,
}

impl PlatePose {
    pub fn z_at(&self, x: f64, y: f64) -> f64 {
        self.height + self.slope.x * x + self.slope.y * y
    }

    /// Tilt (deg) about the in-plane axis perpendicular to `toward`; positive
    /// when the plate descends toward `toward`.
    pub fn roll_deg(&self, toward: Vector2<f64>) -> f64 {
        -self.slope.dot(&toward.normalize()).atan().to_degrees()
    }

    pub(crate) fn to_array(self) -> [f64; 3] {
        [self.height, self.slope.x, self.slope.y]
    }

    pub(crate) fn from_array(q: [f64; 3]) -> Self {
        PlatePose { height: q[0], slope: Vector2::new(q[1], q[2]) }
    }
}

/// Plate state inside a relaxation.
#[derive(Debug, Clone)]
pub(crate) struct PlateSystem {
    pub plate: RigidPlate,
    pub q: [f64; 3],
    /// Degrees of freedom held fixed (reactions are still reported).
    pub fixed: [bool; 3],
    /// Generalized forces on `q` from contact, support and gravity.
    pub force: [f64; 3],
    /// Contact stiffness of each membrane vertex (N/m), zero off the plate.
    vertex_k: Vec<f64>,
    rim: Vec<Vector2<f64>>,
    rim_k: f64,
}

impl PlateSystem {
    pub fn new(plate: RigidPlate, pose: PlatePose, fixed: [bool; 3], rest: &[Vector3<f64>], vertex_area: &[f64], radius: f64) -> Self {
        let a = plate.half_extent;
        let vertex_k = rest
            .iter()
            .zip(vertex_area)
            .map(|(v, &area)| if v.x.abs() <= a && v.y.abs() <= a { plate.contact_stiffness * area } else { 0.0 })
            .collect();
        let step = 2.0 * a / RIM_SAMPLES as f64;
        let mut rim = Vec::new();
        for i in 0..=RIM_SAMPLES {
            for j in 0..=RIM_SAMPLES {
                let p = Vector2::new(-a + step * i as f64, -a + step * j as f64);
                if p.norm() > radius {
                    rim.push(p);
                }
            }
        }
        PlateSystem {
            plate,
            q: pose.to_array(),
            fixed,
            force: [0.0; 3],
            vertex_k,
            rim,
            rim_k: plate.contact_stiffness * step * step,
        }
    }

    pub fn pose(&self) -> PlatePose {
        PlatePose::from_array(self.q)
    }

    /// Adds contact forces to `f` and recomputes the plate's generalized
    /// forces. Returns the contact + gravity potential.
    pub fn accumulate(&mut self, x: &[Vector3<f64>], f: &mut [Vector3<f64>]) -> f64 {
        let [h, sx, sy] = self.q;
        let mut q = [-self.plate.mass * GRAVITY, 0.0, 0.0];
        let mut energy = self.plate.mass * GRAVITY * h;
        for (i, p) in x.iter().enumerate() {
            let k = self.vertex_k[i];
            if k == 0.0 {
                continue;
            }
            let pen = p.z - (h + sx * p.x + sy * p.y);
            if pen <= 0.0 {
                continue;
            }
            let fp = k * pen;
            energy += 0.5 * fp * pen;
            f[i] += Vector3::new(fp * sx, fp * sy, -fp);
            q[0] += fp;
            q[1] += fp * p.x;
            q[2] += fp * p.y;
        }
        for r in &self.rim {
            let pen = -(h + sx * r.x + sy * r.y);
            if pen <= 0.0 {
                continue;
            }
            let fp = self.rim_k * pen;
            energy += 0.5 * fp * pen;
            q[0] += fp;
            q[1] += fp * r.x;
            q[2] += fp * r.y;
        }
        self.force = q;
        energy
    }

    /// Gershgorin row sums of the contact stiffness: adds the vertex rows to
    /// `vertex` and returns the rows of the plate DoFs.
    pub fn stiffness(&self, x: &[Vector3<f64>], vertex: &mut [f64]) -> [f64; 3] {
        let [_, sx, sy] = self.q;
        let lateral = 1.0 + sx.abs() + sy.abs();
        let coupled_k: f64 = self.vertex_k.iter().sum();
        // Diagonal and coupling sums over every potential contact point.
        let (mut k, mut kx, mut ky, mut kxx, mut kyy, mut kxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut kax, mut kay) = (0.0, 0.0);
        let mut add = |kv: f64, px: f64, py: f64, coupled: bool| {
            k += kv;
            kx += kv * px;
            ky += kv * py;
            kxx += kv * px * px;
            kyy += kv * py * py;
            kxy += kv * px * py;
            if coupled {
                kax += kv * px.abs();
                kay += kv * py.abs();
            }
        };
        for (i, p) in x.iter().enumerate() {
            let kv = self.vertex_k[i];
            if kv == 0.0 {
                continue;
            }
            vertex[i] += kv * lateral * (lateral + 1.0 + p.x.abs() + p.y.abs());
            add(kv, p.x, p.y, true);
        }
        for r in &self.rim {
            add(self.rim_k, r.x, r.y, false);
        }
        let coupling = coupled_k * lateral;
        [
            k + kx.abs() + ky.abs() + coupling,
            kxx + kx.abs() + kxy.abs() + kax * lateral,
            kyy + ky.abs() + kxy.abs() + kay * lateral,
        ]
    }

    /// Out-of-balance force on the free plate DoFs, with moments scaled to N.
    pub fn residual_squared(&self) -> f64 {
        let a = self.plate.half_extent;
        let scale = [1.0, 1.0 / a, 1.0 / a];
        (0..3).filter(|&d| !self.fixed[d]).map(|d| (self.force[d] * scale[d]).powi(2)).sum()
    }
}
