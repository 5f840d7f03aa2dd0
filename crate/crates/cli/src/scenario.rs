//! Batch scenarios: one job, one output directory, one manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use actuation::{
    extract_force, mode1_launch, mode1_workspace_with, mode2_release, mode2_tilt, DoFDirection, DofForces, ForceReport,
    LaunchConfig, Payload, PressureProfile, ReleaseConfig, TrajectoryRecord, TrajectorySample, DEFAULT_WINDOW,
};
use clutch_driver::{ClutchPattern, NamedPattern};
use inflation_solver::{apex, export_state, MembraneModel, PlatePose, RigidPlate, SolverConfig};
use membrane_core::design::{build_default_design, ClutchId, MembraneDesign};
use nalgebra::Vector3;
use pointcloud::{icp_align, read_cloud, rmse, statistical_outlier_removal, CloudSource, IcpConfig, IcpResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;
use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Named(NamedPattern),
    Clutches(Vec<ClutchId>),
}

impl PatternSpec {
    pub fn pattern(&self) -> ClutchPattern {
        match self {
            PatternSpec::Named(n) => ClutchPattern::named(*n),
            PatternSpec::Clutches(c) => ClutchPattern::with_active(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierFilter {
    pub k: usize,
    pub std_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioKind {
    Shape {
        pattern: PatternSpec,
        /// Pa
        pressure: f64,
    },
    Workspace {
        #[serde(default = "default_workspace_pressure")]
        pressure: f64,
        #[serde(default = "default_workspace_directions")]
        directions: Vec<DoFDirection>,
        #[serde(default)]
        payload: Payload,
    },
    Launch {
        directions: Vec<DoFDirection>,
        /// Pa; the direction's trial pressure when absent.
        #[serde(default)]
        pressure: Option<f64>,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default)]
        payload: Payload,
        /// Gaussian marker noise added per trial (m), drawn from the seed.
        #[serde(default)]
        marker_noise: f64,
        #[serde(default = "default_window")]
        window: usize,
    },
    Mode2 {
        #[serde(default = "default_mode2_clutches")]
        clutches: Vec<ClutchId>,
        #[serde(default = "default_mode2_pressure")]
        pressure: f64,
        #[serde(default = "default_ramp_steps")]
        steps: usize,
        /// s
        #[serde(default = "default_ramp_duration")]
        ramp_duration: f64,
        /// kg
        #[serde(default = "default_plate_mass")]
        plate_mass: f64,
        /// m
        #[serde(default = "default_plate_half_extent")]
        plate_half_extent: f64,
        #[serde(default)]
        release: ReleaseConfig,
    },
    CompareClouds {
        measured: PathBuf,
        simulated: PathBuf,
        #[serde(default)]
        outlier_filter: Option<OutlierFilter>,
        #[serde(default)]
        icp: IcpConfig,
    },
}

fn default_workspace_pressure() -> f64 {
    1700.0
}
fn default_workspace_directions() -> Vec<DoFDirection> {
    DoFDirection::ALL.to_vec()
}
fn default_trials() -> usize {
    10
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_mode2_clutches() -> Vec<ClutchId> {
    vec![ClutchId::OutboardE]
}
fn default_mode2_pressure() -> f64 {
    3100.0
}
fn default_ramp_steps() -> usize {
    6
}
fn default_ramp_duration() -> f64 {
    5.0
}
fn default_plate_mass() -> f64 {
    0.82
}
fn default_plate_half_extent() -> f64 {
    0.1
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Shape { .. } => "shape",
            ScenarioKind::Workspace { .. } => "workspace",
            ScenarioKind::Launch { .. } => "launch",
            ScenarioKind::Mode2 { .. } => "mode2",
            ScenarioKind::CompareClouds { .. } => "compare-clouds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    #[serde(default)]
    pub design: Option<PathBuf>,
    #[serde(default)]
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{what} file {} does not exist", path.display())))
    }
}

fn positive(x: f64, what: &str) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{what} must be positive, got {x}")))
    }
}

impl ScenarioSpec {
    pub fn from_json_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Invalid(format!("scenario: {e}")))
    }

    /// Checks referenced files and parameter ranges without running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(d) = &self.design {
            require_file(d, "design")?;
        }
        if let Some(c) = &self.config {
            require_file(c, "config")?;
        }
        match &self.kind {
            ScenarioKind::Shape { pressure, .. } => {
                if !(pressure.is_finite() && *pressure >= 0.0) {
                    return Err(CliError::Invalid(format!("pressure must be non-negative, got {pressure}")));
                }
            }
            ScenarioKind::Workspace { pressure, directions, .. } => {
                positive(*pressure, "pressure")?;
                if directions.is_empty() {
                    return Err(CliError::Invalid("no directions given".into()));
                }
            }
            ScenarioKind::Launch { directions, pressure, trials, marker_noise, .. } => {
                if directions.is_empty() || *trials == 0 {
                    return Err(CliError::Invalid("launch needs at least one direction and one trial".into()));
                }
                if let Some(p) = pressure {
                    positive(*p, "pressure")?;
                }
                if !(marker_noise.is_finite() && *marker_noise >= 0.0) {
                    return Err(CliError::Invalid(format!("marker_noise must be non-negative, got {marker_noise}")));
                }
            }
            ScenarioKind::Mode2 { pressure, steps, ramp_duration, plate_half_extent, .. } => {
                positive(*pressure, "pressure")?;
                positive(*ramp_duration, "ramp_duration")?;
                positive(*plate_half_extent, "plate_half_extent")?;
                if *steps == 0 {
                    return Err(CliError::Invalid("steps must be at least 1".into()));
                }
            }
            ScenarioKind::CompareClouds { measured, simulated, .. } => {
                require_file(measured, "measured cloud")?;
                require_file(simulated, "simulated cloud")?;
            }
        }
        Ok(())
    }

    pub fn load_design(&self) -> Result<MembraneDesign, CliError> {
        let design = match &self.design {
            Some(p) => MembraneDesign::load(p)?,
            None => build_default_design(),
        };
        design.validate()?;
        Ok(design)
    }

    pub fn load_config(&self) -> Result<SolverConfig, CliError> {
        match &self.config {
            Some(p) => {
                let s = fs::read_to_string(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?;
                Ok(SolverConfig::from_json_str(&s)?)
            }
            None => Ok(SolverConfig::default()),
        }
    }

    fn model(&self) -> Result<MembraneModel, CliError> {
        Ok(MembraneModel::new(&self.load_design()?, &self.load_config()?)?)
    }
}

/// Collects the files a scenario writes, relative to the output directory.
struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Output { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, rel: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let rel = rel.as_ref();
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.write(rel, serde_json::to_string_pretty(value)? + "\n")
    }
}

/// Runs a validated scenario and writes its manifest.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<Manifest, CliError> {
    spec.validate()?;
    let mut out = Output::new(&spec.out)?;
    match &spec.kind {
        ScenarioKind::Shape { pattern, pressure } => {
            let model = spec.model()?;
            let state = model.solve_equilibrium(&pattern.pattern(), *pressure, None)?;
            export_state(&state, &out.dir, "shape").map_err(|e| CliError::io("exporting shape", e))?;
            out.files.extend(["shape.ply".into(), "shape.json".into()]);
            let a = apex(&state);
            out.write_json(
                "apex.json",
                &json!({
                    "apex_mm": a.height * 1e3,
                    "apex_point_m": [a.point.x, a.point.y, a.point.z],
                    "vertex": a.vertex,
                    "pressure_pa": state.pressure,
                    "active": state.pattern.active(),
                    "triangles": model.mesh.triangle_count(),
                }),
            )?;
        }
        ScenarioKind::Workspace { pressure, directions, payload } => {
            let model = spec.model()?;
            let result = mode1_workspace_with(&model, *pressure, directions, payload)?;
            out.write_json("workspace.json", &result)?;
            let mut table = String::from("DoF  Lateral mm  dx mm  dy mm  dz mm  Flag\n");
            for (dir, e) in &result.entries {
                match e.displacement {
                    Some(d) => writeln!(
                        table,
                        "{}  {:.2}  {:.2}  {:.2}  {:.2}  {}",
                        dir.label(),
                        e.lateral.unwrap_or(0.0) * 1e3,
                        d.x * 1e3,
                        d.y * 1e3,
                        d.z * 1e3,
                        if e.is_flagged() { "yes" } else { "" }
                    ),
                    None => writeln!(table, "{}  -  -  -  -  {}", dir.label(), e.error.as_deref().unwrap_or("failed")),
                }
                .expect("string write");
            }
            out.write("workspace.txt", table)?;
        }
        ScenarioKind::Launch { directions, pressure, trials, payload, marker_noise, window } => {
            let model = spec.model()?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let noise = (*marker_noise > 0.0).then(|| Normal::new(0.0, *marker_noise).expect("finite sigma"));
            let mut dofs = Vec::new();
            for &dir in directions {
                let p = pressure.unwrap_or_else(|| dir.trial_pressure());
                // The simulation is deterministic, so trials differ only by marker noise.
                let launch = mode1_launch(&model, dir, p, payload, &LaunchConfig::default())?;
                let mut estimates = Vec::with_capacity(*trials);
                for k in 0..*trials {
                    let samples: Vec<TrajectorySample> = launch
                        .record
                        .samples
                        .iter()
                        .map(|s| {
                            let mut s = *s;
                            if let Some(n) = &noise {
                                s.position += Vector3::from_fn(|_, _| n.sample(&mut rng));
                            }
                            s
                        })
                        .collect();
                    let record = TrajectoryRecord::new(samples, payload.mass)?;
                    let mut csv = Vec::new();
                    record.write_csv(&mut csv)?;
                    out.write(format!("trajectories/{}_{:02}.csv", dir.as_str(), k + 1), csv)?;
                    estimates.push(extract_force(&record, *window)?);
                }
                dofs.push(DofForces::from_trials(dir, &estimates)?);
            }
            let report = ForceReport::new(dofs);
            out.write_json("forces.json", &report)?;
            out.write("forces.txt", report.to_table())?;
        }
        ScenarioKind::Mode2 { clutches, pressure, steps, ramp_duration, plate_mass, plate_half_extent, release } => {
            let model = spec.model()?;
            let plate = RigidPlate::new(*plate_mass, *plate_half_extent);
            let pattern = ClutchPattern::with_active(clutches);
            let tilt = mode2_tilt(&model, &pattern, &PressureProfile::ramp(*pressure, *steps, *ramp_duration), &plate)?;
            let rel = mode2_release(&model, &tilt, release)?;
            let mut csv = String::from("t_s,pressure_pa,roll_deg,pitch_deg,height_m\n");
            for s in &tilt.samples {
                writeln!(csv, "{},{},{},{},{}", s.t, s.pressure, s.roll, s.pitch, s.height).expect("string write");
            }
            out.write("tilt.csv", csv)?;
            let mut csv = String::from("t_s,roll_deg\n");
            for (t, r) in &rel.samples {
                writeln!(csv, "{t},{r}").expect("string write");
            }
            out.write("release.csv", csv)?;
            export_state(&tilt.state, &out.dir, "tilt").map_err(|e| CliError::io("exporting tilt state", e))?;
            out.files.extend(["tilt.ply".into(), "tilt.json".into()]);
            let pose: PlatePose = tilt.pose;
            out.write_json(
                "mode2.json",
                &json!({
                    "final_roll_deg": tilt.final_roll(),
                    "roll_reference": [tilt.roll_reference.x, tilt.roll_reference.y],
                    "plate": plate,
                    "pose": pose,
                    "release": {
                        "final_roll_deg": rel.final_roll,
                        "stiffness_nm_per_rad": rel.stiffness,
                        "inertia_kgm2": rel.inertia,
                        "natural_frequency_rad_s": rel.natural_frequency,
                        "damping_ratio": release.damping_ratio,
                        "overshoots": rel.overshoots(0.01),
                        "last_roll_deg": rel.samples.last().map(|s| s.1),
                    },
                }),
            )?;
        }
        ScenarioKind::CompareClouds { measured, simulated, outlier_filter, icp } => {
            let raw = read_cloud(measured, CloudSource::DepthCamera)?;
            let sim = read_cloud(simulated, CloudSource::Simulation)?;
            let filtered = match outlier_filter {
                Some(f) => statistical_outlier_removal(&raw, f.k, f.std_multiplier)?,
                None => raw.clone(),
            };
            let unaligned = rmse(&filtered, &sim)?;
            let result: IcpResult = icp_align(&filtered, &sim, icp)?;
            let aligned = rmse(&filtered.transformed(&result.transform), &sim)?;
            out.write_json(
                "compare.json",
                &json!({
                    "measured_points": raw.len(),
                    "filtered_points": filtered.len(),
                    "simulated_points": sim.len(),
                    "rmse_unaligned_m": unaligned,
                    "rmse_m": aligned,
                    "rmse_mm": aligned * 1e3,
                    "icp": result,
                }),
            )?;
        }
    }
    let manifest = Manifest::build(&out.dir, spec.kind.name(), spec.seed, &out.files)?;
    manifest.write(&out.dir)?;
    Ok(manifest)
}
