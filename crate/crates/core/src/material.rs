//! Strain-energy densities in principal-stretch form for thin membranes.
//!
//! Energies are per unit reference volume. Elastomer regions use the
//! incompressible Ogden law with `λ₃ = 1/(λ₁λ₂)`; reinforced regions and clutch
//! laminates use the plane-stress Saint Venant–Kirchhoff law (linear elastic in
//! Green strain, which keeps rigid rotations stress free).
//!
//! Compressive load paths are relaxed with a tension-field construction: when
//! the minor principal stress would be compressive, the energy is blended as
//! `(1 − ε)·W_relaxed + ε·W`, where `W_relaxed` is the energy with the slack
//! direction at its natural width. The blend is an exact potential, so forces
//! stay consistent with the energy.

use serde::{Deserialize, Serialize};

use crate::design::{MaterialKind, MaterialModel, OgdenTerm};

/// Energy density and its derivatives with respect to the two stretches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StretchResponse {
    pub energy: f64,
    pub d1: f64,
    pub d2: f64,
}

impl StretchResponse {
    fn blend(self, other: StretchResponse, weight_other: f64) -> StretchResponse {
        let w = 1.0 - weight_other;
        StretchResponse {
            energy: w * self.energy + weight_other * other.energy,
            d1: w * self.d1 + weight_other * other.d1,
            d2: w * self.d2 + weight_other * other.d2,
        }
    }

    fn swapped(self) -> StretchResponse {
        StretchResponse { energy: self.energy, d1: self.d2, d2: self.d1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembraneState {
    Taut,
    Wrinkled,
    Slack,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constitutive {
    Ogden(Vec<OgdenTerm>),
    StVenantKirchhoff { youngs: f64, poisson: f64 },
}

impl From<&MaterialModel> for Constitutive {
    fn from(m: &MaterialModel) -> Self {
        match m.kind {
            MaterialKind::Ogden3 => Constitutive::Ogden(m.ogden_params.clone()),
            MaterialKind::LinearElastic => Constitutive::StVenantKirchhoff {
                youngs: m.youngs_modulus,
                poisson: m.poisson_ratio,
            },
        }
    }
}

impl Constitutive {
    /// Unrelaxed energy density `W(λ₁, λ₂)`.
    pub fn full(&self, l1: f64, l2: f64) -> StretchResponse {
        match self {
            Constitutive::Ogden(terms) => {
                let j = l1 * l2;
                let mut r = StretchResponse::default();
                for t in terms {
                    let a = l1.powf(t.alpha);
                    let b = l2.powf(t.alpha);
                    let c = j.powf(-t.alpha);
                    r.energy += t.mu / t.alpha * (a + b + c - 3.0);
                    r.d1 += t.mu * (a - c) / l1;
                    r.d2 += t.mu * (b - c) / l2;
                }
                r
            }
            &Constitutive::StVenantKirchhoff { youngs, poisson } => {
                let k = youngs / (1.0 - poisson * poisson);
                let e1 = 0.5 * (l1 * l1 - 1.0);
                let e2 = 0.5 * (l2 * l2 - 1.0);
                StretchResponse {
                    energy: 0.5 * k * (e1 * e1 + e2 * e2 + 2.0 * poisson * e1 * e2),
                    d1: k * (e1 + poisson * e2) * l1,
                    d2: k * (e2 + poisson * e1) * l2,
                }
            }
        }
    }

    /// Energy of uniaxial tension `λ` with the lateral direction free.
    pub fn uniaxial(&self, l: f64) -> StretchResponse {
        match self {
            Constitutive::Ogden(terms) => {
                let mut r = StretchResponse::default();
                for t in terms {
                    let a = l.powf(t.alpha);
                    let c = l.powf(-0.5 * t.alpha);
                    r.energy += t.mu / t.alpha * (a + 2.0 * c - 3.0);
                    r.d1 += t.mu * (a - c) / l;
                }
                r
            }
            &Constitutive::StVenantKirchhoff { youngs, .. } => {
                let e = 0.5 * (l * l - 1.0);
                StretchResponse { energy: 0.5 * youngs * e * e, d1: youngs * e * l, d2: 0.0 }
            }
        }
    }

    /// Tension-field energy density. `wrinkle_factor` ∈ (0, 1] is the fraction
    /// of the unrelaxed energy retained once a direction goes slack.
    pub fn membrane(&self, l1: f64, l2: f64, wrinkle_factor: f64) -> (StretchResponse, MembraneState) {
        if l1 < l2 {
            let (r, s) = self.membrane(l2, l1, wrinkle_factor);
            return (r.swapped(), s);
        }
        let full = self.full(l1, l2);
        if full.d2 >= 0.0 || wrinkle_factor >= 1.0 {
            return (full, MembraneState::Taut);
        }
        let (relaxed, state) = if l1 > 1.0 {
            (self.uniaxial(l1), MembraneState::Wrinkled)
        } else {
            (StretchResponse::default(), MembraneState::Slack)
        };
        (relaxed.blend(full, wrinkle_factor), state)
    }

    /// Upper estimate of the stretch-space tangent, used to size pseudo-masses.
    pub fn tangent_bound(&self, l1: f64, l2: f64, wrinkle_factor: f64) -> f64 {
        let h = 1e-6;
        let (p1, _) = self.membrane(l1 + h, l2, wrinkle_factor);
        let (m1, _) = self.membrane(l1 - h, l2, wrinkle_factor);
        let (p2, _) = self.membrane(l1, l2 + h, wrinkle_factor);
        let (m2, _) = self.membrane(l1, l2 - h, wrinkle_factor);
        let (c, _) = self.membrane(l1, l2, wrinkle_factor);
        let w11 = (p1.d1 - m1.d1) / (2.0 * h);
        let w22 = (p2.d2 - m2.d2) / (2.0 * h);
        let w12 = (p2.d1 - m2.d1) / (2.0 * h);
        let geometric = (c.d1 / l1).abs().max((c.d2 / l2).abs());
        w11.abs().max(w22.abs()) + w12.abs() + geometric
    }

    /// Small-strain in-plane stiffness scale (Pa).
    pub fn initial_modulus(&self) -> f64 {
        match self {
            Constitutive::Ogden(terms) => 1.5 * terms.iter().map(|t| t.mu * t.alpha).sum::<f64>(),
            &Constitutive::StVenantKirchhoff { youngs, poisson } => youngs / (1.0 - poisson * poisson),
        }
    }
}
