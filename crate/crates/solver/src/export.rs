//! Deformed-state export: ASCII PLY of deformed coordinates plus a JSON sidecar.

use std::fs;
use std::path::Path;

use clutch_driver::ClutchPattern;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{apex, DeformedState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSidecar {
    pub pressure_pa: f64,
    pub pattern: ClutchPattern,
    pub apex_mm: f64,
    /// N
    pub residual: f64,
}

impl StateSidecar {
    pub fn of(state: &DeformedState) -> Self {
        StateSidecar {
            pressure_pa: state.pressure,
            pattern: state.pattern.clone(),
            apex_mm: apex(state).height * 1e3,
            residual: state.residual_norm,
        }
    }
}

/// Writes `<stem>.ply` and `<stem>.json` into `dir`; returns both paths.
pub fn export_state(state: &DeformedState, dir: &Path, stem: &str) -> std::io::Result<[std::path::PathBuf; 2]> {
    fs::create_dir_all(dir)?;
    let ply = dir.join(format!("{stem}.ply"));
    let json = dir.join(format!("{stem}.json"));
    let mut buf = Vec::new();
    state.mesh.write_ply(&mut buf, Some(&state.displacement))?;
    fs::write(&ply, buf)?;
    let sidecar = serde_json::to_string_pretty(&StateSidecar::of(state)).map_err(std::io::Error::other)?;
    fs::write(&json, sidecar + "\n")?;
    Ok([ply, json])
}
