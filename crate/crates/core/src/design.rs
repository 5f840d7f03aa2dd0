//! Actuator geometry: concentric soft/stabilized rings, clutch footprints and
//! the material models assigned to each region.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version written to and required from design files.
pub const DESIGN_SCHEMA_VERSION: u32 = 1;

/// Geometric slack used when checking that rings tile the disk.
const TILING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid design: {0}")]
    Invalid(String),
    #[error("point ({x:.6}, {y:.6}) lies outside the membrane radius {radius}")]
    OutsideDisk { x: f64, y: f64, radius: f64 },
    #[error("unsupported design schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("design file: {0}")]
    Io(#[from] std::io::Error),
    #[error("design json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingMaterial {
    /// Unreinforced elastomer.
    Soft,
    /// Elastomer with embedded fabric stabilizer.
    Stabilized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub inner: f64,
    pub outer: f64,
    pub material: RingMaterial,
}

impl AnnulusSpec {
    pub fn width(&self) -> f64 {
        self.outer - self.inner
    }

    pub fn area(&self) -> f64 {
        PI * (self.outer * self.outer - self.inner * self.inner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutchId {
    Inboard,
    OutboardN,
    OutboardE,
    OutboardS,
    OutboardW,
}

impl ClutchId {
    pub const ALL: [ClutchId; 5] = [
        ClutchId::Inboard,
        ClutchId::OutboardN,
        ClutchId::OutboardE,
        ClutchId::OutboardS,
        ClutchId::OutboardW,
    ];

    pub const OUTBOARD: [ClutchId; 4] = [
        ClutchId::OutboardN,
        ClutchId::OutboardE,
        ClutchId::OutboardS,
        ClutchId::OutboardW,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_outboard(self) -> bool {
        self != ClutchId::Inboard
    }

    /// Azimuth of an outboard clutch's center line, measured from +x toward +y.
    /// East is +x, North is +y.
    pub fn azimuth(self) -> Option<f64> {
        match self {
            ClutchId::Inboard => None,
            ClutchId::OutboardE => Some(0.0),
            ClutchId::OutboardN => Some(FRAC_PI_2),
            ClutchId::OutboardW => Some(PI),
            ClutchId::OutboardS => Some(3.0 * FRAC_PI_2),
        }
    }

    /// The clutch occupying this clutch's place after a +90° rotation about z.
    pub fn rotated_quarter(self) -> ClutchId {
        match self {
            ClutchId::Inboard => ClutchId::Inboard,
            ClutchId::OutboardE => ClutchId::OutboardN,
            ClutchId::OutboardN => ClutchId::OutboardW,
            ClutchId::OutboardW => ClutchId::OutboardS,
            ClutchId::OutboardS => ClutchId::OutboardE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClutchId::Inboard => "inboard",
            ClutchId::OutboardN => "outboard_n",
            ClutchId::OutboardE => "outboard_e",
            ClutchId::OutboardS => "outboard_s",
            ClutchId::OutboardW => "outboard_w",
        }
    }
}

impl fmt::Display for ClutchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClutchId {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = match s.trim().to_ascii_lowercase().as_str() {
            "inboard" => ClutchId::Inboard,
            "outboard_n" | "outboardn" | "n" => ClutchId::OutboardN,
            "outboard_e" | "outboarde" | "e" => ClutchId::OutboardE,
            "outboard_s" | "outboards" | "s" => ClutchId::OutboardS,
            "outboard_w" | "outboardw" | "w" => ClutchId::OutboardW,
            other => return Err(DesignError::Invalid(format!("unknown clutch id {other:?}"))),
        };
        Ok(id)
    }
}

/// Angular interval given by its center and full width (radians).
/// A width of 2π or more covers the full circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularSpan {
    pub center: f64,
    pub width: f64,
}

impl AngularSpan {
    pub fn full() -> Self {
        AngularSpan { center: 0.0, width: TAU }
    }

    pub fn is_full(&self) -> bool {
        self.width >= TAU - 1e-12
    }

    pub fn contains(&self, theta: f64) -> bool {
        if self.is_full() {
            return true;
        }
        wrap_angle(theta - self.center).abs() <= 0.5 * self.width + 1e-12
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutchFootprint {
    pub id: ClutchId,
    /// Radial interval `[inner, outer]` covered by the laminate (m).
    pub radial: [f64; 2],
    pub angular: AngularSpan,
    /// Indices into `MembraneDesign::rings` of the two stabilized annuli the
    /// clutch ends are bonded to.
    pub anchor_rings: [usize; 2],
}

impl ClutchFootprint {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = x.hypot(y);
        if r < self.radial[0] - 1e-12 || r > self.radial[1] + 1e-12 {
            return false;
        }
        // The origin has no azimuth; only full annuli can contain it.
        if r == 0.0 {
            return self.angular.is_full();
        }
        self.angular.contains(y.atan2(x))
    }

    /// Nominal bonded area of the footprint (annular sector).
    pub fn area(&self) -> f64 {
        let w = self.angular.width.min(TAU);
        0.5 * w * (self.radial[1].powi(2) - self.radial[0].powi(2))
    }

    pub fn rotated_quarter(&self) -> ClutchFootprint {
        ClutchFootprint {
            id: self.id.rotated_quarter(),
            radial: self.radial,
            angular: AngularSpan {
                center: wrap_angle(self.angular.center + FRAC_PI_2),
                width: self.angular.width,
            },
            anchor_rings: self.anchor_rings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Ogden3,
    LinearElastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgdenTerm {
    /// Pa
    pub mu: f64,
    pub alpha: f64,
}

/// Constitutive description of one region.
///
/// Ogden terms use the form `W = Σ μᵢ/αᵢ (λ₁^αᵢ + λ₂^αᵢ + λ₃^αᵢ − 3)`, for
/// which the small-strain shear modulus is `½ Σ μᵢ αᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub kind: MaterialKind,
    #[serde(default)]
    pub ogden_params: Vec<OgdenTerm>,
    #[serde(default)]
    pub youngs_modulus: f64,
    #[serde(default)]
    pub poisson_ratio: f64,
    pub density: f64,
}

impl MaterialModel {
    pub fn ogden3(terms: [OgdenTerm; 3], density: f64) -> Self {
        let shear: f64 = terms.iter().map(|t| 0.5 * t.mu * t.alpha).sum();
        MaterialModel {
            kind: MaterialKind::Ogden3,
            ogden_params: terms.to_vec(),
            youngs_modulus: 3.0 * shear,
            poisson_ratio: 0.5,
            density,
        }
    }

    pub fn linear_elastic(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Self {
        MaterialModel {
            kind: MaterialKind::LinearElastic,
            ogden_params: Vec::new(),
            youngs_modulus,
            poisson_ratio,
            density,
        }
    }

    /// Ecoflex 00-30, three-term Ogden fit published by the Soft Robotics
    /// Toolkit (ABAQUS form `2μ/α²`, converted here to `μ/α`).
    pub fn ecoflex_00_30() -> Self {
        // (μ_abaqus [Pa], α)
        const FIT: [(f64, f64); 3] = [(24_361.0, 1.7138), (66.703, 7.0679), (453.81, -3.3659)];
        let terms = FIT.map(|(mu_abq, alpha)| OgdenTerm {
            mu: 2.0 * mu_abq / alpha,
            alpha,
        });
        MaterialModel::ogden3(terms, 1070.0)
    }

    /// Initial (small-strain) shear modulus.
    pub fn shear_modulus(&self) -> f64 {
        match self.kind {
            MaterialKind::Ogden3 => self.ogden_params.iter().map(|t| 0.5 * t.mu * t.alpha).sum(),
            MaterialKind::LinearElastic => {
                self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
            }
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.density > 0.0) {
            return Err(DesignError::Invalid("material density must be positive".into()));
        }
        match self.kind {
            MaterialKind::Ogden3 => {
                if self.ogden_params.len() != 3 {
                    return Err(DesignError::Invalid(format!(
                        "Ogden3 needs exactly 3 (mu, alpha) pairs, got {}",
                        self.ogden_params.len()
                    )));
                }
                if self.ogden_params.iter().any(|t| t.alpha == 0.0 || !t.mu.is_finite()) {
                    return Err(DesignError::Invalid("Ogden alpha must be nonzero".into()));
                }
                if !(self.shear_modulus() > 0.0) {
                    return Err(DesignError::Invalid(
                        "Ogden ground-state shear modulus (sum mu*alpha) must be positive".into(),
                    ));
                }
            }
            MaterialKind::LinearElastic => {
                if !(self.youngs_modulus > 0.0) {
                    return Err(DesignError::Invalid("Young's modulus must be positive".into()));
                }
                if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
                    return Err(DesignError::Invalid("Poisson ratio must lie in (-1, 0.5)".into()));
                }
            }
        }
        Ok(())
    }
}

/// Which region a point (or triangle centroid) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionTag {
    pub ring: usize,
    pub material: RingMaterial,
    pub clutch: Option<ClutchId>,
}

impl RegionTag {
    /// Integer code used by mesh export: the ring index, plus
    /// `100 * (clutch index + 1)` for clutch-covered regions.
    pub fn code(&self) -> i32 {
        let base = self.ring as i32;
        match self.clutch {
            Some(c) => base + 100 * (c.index() as i32 + 1),
            None => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneDesign {
    pub schema_version: u32,
    /// Clamped radius (m).
    pub radius: f64,
    pub silicone_thickness: f64,
    pub clutch_thickness: f64,
    /// Ordered from the center outward.
    pub rings: Vec<AnnulusSpec>,
    pub clutch_footprints: Vec<ClutchFootprint>,
    pub soft_material: MaterialModel,
    pub stabilized_material: MaterialModel,
    pub clutch_material: MaterialModel,
}

/// Geometric parameters of the five-clutch, three-soft-ring actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignLayout {
    /// Clamped radius (m).
    pub radius: f64,
    /// Stabilized center disk radius (m).
    pub center_radius: f64,
    /// Widths of the three soft annuli, inner to outer (m).
    pub soft_widths: [f64; 3],
    /// Widths of the two intermediate stabilized annuli (m).
    pub stabilized_widths: [f64; 2],
    /// How far a clutch laminate extends onto each anchoring stabilized ring (m).
    pub anchor_overlap: f64,
    /// Angular width of each outboard clutch (rad).
    pub outboard_width: f64,
}

impl Default for DesignLayout {
    fn default() -> Self {
        DesignLayout {
            radius: 0.075,
            center_radius: 0.017,
            soft_widths: [0.007, 0.0062, 0.0062],
            stabilized_widths: [0.011, 0.011],
            anchor_overlap: 0.004,
            outboard_width: 1.5,
        }
    }
}

/// The five-clutch, three-soft-ring actuator with the default layout.
pub fn build_default_design() -> MembraneDesign {
    build_design(&DesignLayout::default())
}

pub fn build_design(layout: &DesignLayout) -> MembraneDesign {
    let radius = layout.radius;
    let overlap = layout.anchor_overlap;
    let mut rings = Vec::with_capacity(7);
    let mut r = 0.0;
    let mut push = |width: f64, material: RingMaterial, rings: &mut Vec<AnnulusSpec>| {
        rings.push(AnnulusSpec { inner: r, outer: r + width, material });
        r += width;
    };
    push(layout.center_radius, RingMaterial::Stabilized, &mut rings);
    push(layout.soft_widths[0], RingMaterial::Soft, &mut rings);
    push(layout.stabilized_widths[0], RingMaterial::Stabilized, &mut rings);
    push(layout.soft_widths[1], RingMaterial::Soft, &mut rings);
    push(layout.stabilized_widths[1], RingMaterial::Stabilized, &mut rings);
    push(layout.soft_widths[2], RingMaterial::Soft, &mut rings);
    let rim_inner = rings.last().map(|a| a.outer).unwrap_or(0.0);
    rings.push(AnnulusSpec { inner: rim_inner, outer: radius, material: RingMaterial::Stabilized });

    let inboard = ClutchFootprint {
        id: ClutchId::Inboard,
        radial: [rings[1].inner - overlap, rings[1].outer + overlap],
        angular: AngularSpan::full(),
        anchor_rings: [0, 2],
    };
    let outboard_radial = [rings[3].inner - overlap, rings[5].outer + overlap];
    let mut footprints = vec![inboard];
    for id in ClutchId::OUTBOARD {
        footprints.push(ClutchFootprint {
            id,
            radial: outboard_radial,
            angular: AngularSpan { center: id.azimuth().unwrap_or(0.0), width: layout.outboard_width },
            anchor_rings: [2, 6],
        });
    }

    MembraneDesign {
        schema_version: DESIGN_SCHEMA_VERSION,
        radius,
        silicone_thickness: 0.001,
        clutch_thickness: 0.0002,
        rings,
        clutch_footprints: footprints,
        soft_material: MaterialModel::ecoflex_00_30(),
        stabilized_material: MaterialModel::linear_elastic(8.0e6, 0.3, 1070.0),
        clutch_material: MaterialModel::linear_elastic(1.0e8, 0.3, 1400.0),
    }
}

impl MembraneDesign {
    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |msg: String| Err(DesignError::Invalid(msg));
        if self.schema_version != DESIGN_SCHEMA_VERSION {
            return Err(DesignError::SchemaVersion {
                found: self.schema_version,
                expected: DESIGN_SCHEMA_VERSION,
            });
        }
        if !(self.radius > 0.0) {
            return bad("radius must be positive".into());
        }
        if !(self.silicone_thickness > 0.0) || !(self.clutch_thickness > 0.0) {
            return bad("silicone_thickness and clutch_thickness must be positive".into());
        }
        if self.rings.is_empty() {
            return bad("design has no rings".into());
        }
        let mut expected_inner = 0.0;
        for (i, ring) in self.rings.iter().enumerate() {
            if (ring.inner - expected_inner).abs() > TILING_TOL {
                return bad(format!(
                    "ring {i} starts at {} but the previous ring ends at {expected_inner}",
                    ring.inner
                ));
            }
            if !(ring.width() > TILING_TOL) {
                return bad(format!("ring {i} has zero or negative width"));
            }
            expected_inner = ring.outer;
        }
        if (expected_inner - self.radius).abs() > TILING_TOL {
            return bad(format!(
                "rings end at {expected_inner} but the membrane radius is {}",
                self.radius
            ));
        }

        for fp in &self.clutch_footprints {
            if fp.radial[0] < 0.0 || fp.radial[1] > self.radius + TILING_TOL || fp.radial[0] >= fp.radial[1] {
                return bad(format!("clutch {} has an invalid radial span", fp.id));
            }
            if !(fp.angular.width > 0.0) {
                return bad(format!("clutch {} has zero angular width", fp.id));
            }
            let bridges_soft = self.rings.iter().any(|r| {
                r.material == RingMaterial::Soft
                    && fp.radial[0] <= r.inner + TILING_TOL
                    && fp.radial[1] >= r.outer - TILING_TOL
            });
            if !bridges_soft {
                return bad(format!("clutch {} does not span a full soft annulus", fp.id));
            }
            for &a in &fp.anchor_rings {
                let Some(ring) = self.rings.get(a) else {
                    return bad(format!("clutch {} anchors to missing ring {a}", fp.id));
                };
                if ring.material != RingMaterial::Stabilized {
                    return bad(format!("clutch {} anchors to soft ring {a}", fp.id));
                }
                if fp.radial[1] <= ring.inner || fp.radial[0] >= ring.outer {
                    return bad(format!("clutch {} does not overlap its anchor ring {a}", fp.id));
                }
            }
        }
        for (i, a) in self.clutch_footprints.iter().enumerate() {
            for b in &self.clutch_footprints[i + 1..] {
                if a.id == b.id {
                    return bad(format!("clutch {} listed twice", a.id));
                }
                if footprints_overlap(a, b) {
                    return bad(format!("clutch footprints {} and {} overlap", a.id, b.id));
                }
            }
        }

        self.soft_material.validate()?;
        self.stabilized_material.validate()?;
        self.clutch_material.validate()?;
        Ok(())
    }

    pub fn footprint(&self, id: ClutchId) -> Option<&ClutchFootprint> {
        self.clutch_footprints.iter().find(|f| f.id == id)
    }

    pub fn soft_ring_count(&self) -> usize {
        self.rings.iter().filter(|r| r.material == RingMaterial::Soft).count()
    }

    pub fn material_for(&self, ring: RingMaterial) -> &MaterialModel {
        match ring {
            RingMaterial::Soft => &self.soft_material,
            RingMaterial::Stabilized => &self.stabilized_material,
        }
    }

    /// Region containing the planar point `(x, y)`. Points on a ring boundary
    /// belong to the outer ring; the rim itself belongs to the last ring.
    pub fn region_lookup(&self, x: f64, y: f64) -> Result<RegionTag, DesignError> {
        let r = x.hypot(y);
        if r > self.radius + TILING_TOL {
            return Err(DesignError::OutsideDisk { x, y, radius: self.radius });
        }
        let ring = self
            .rings
            .iter()
            .position(|a| r >= a.inner && r < a.outer)
            .unwrap_or(self.rings.len() - 1);
        let clutch = self.clutch_footprints.iter().find(|f| f.contains(x, y)).map(|f| f.id);
        Ok(RegionTag { ring, material: self.rings[ring].material, clutch })
    }

    /// Same design with every clutch footprint rotated by +90° about z.
    pub fn with_clutches_rotated_quarter(&self) -> MembraneDesign {
        let mut d = self.clone();
        d.clutch_footprints = self.clutch_footprints.iter().map(|f| f.rotated_quarter()).collect();
        d
    }

    pub fn from_json_str(s: &str) -> Result<Self, DesignError> {
        let design: MembraneDesign = serde_json::from_str(s)?;
        design.validate()?;
        Ok(design)
    }

    pub fn to_json_string(&self) -> Result<String, DesignError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DesignError> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

fn footprints_overlap(a: &ClutchFootprint, b: &ClutchFootprint) -> bool {
    let radial = a.radial[0] < b.radial[1] && b.radial[0] < a.radial[1];
    if !radial {
        return false;
    }
    if a.angular.is_full() || b.angular.is_full() {
        return true;
    }
    let gap = wrap_angle(a.angular.center - b.angular.center).abs();
    gap < 0.5 * (a.angular.width + b.angular.width)
}
