use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use actuation::{DoFDirection, Payload, ReleaseConfig};
use clap::{Parser, Subcommand};
use clutch_driver::NamedPattern;
use membrane_core::design::ClutchId;
use membrane_cli::scenario::OutlierFilter;
use membrane_cli::{run_scenario, CliError, PatternSpec, ScenarioKind, ScenarioSpec, EXIT_INVALID};
use pointcloud::IcpConfig;

#[derive(Debug, Parser)]
#[command(name = "membrane", version, about = "Clutch-patterned membrane simulations")]
struct Cli {
    /// Membrane design JSON; the built-in layout when omitted.
    #[arg(long, global = true)]
    design: Option<PathBuf>,
    /// Solver config JSON; defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Static inflation of one clutch pattern.
    Shape {
        /// plateau, round, pyramid, or a comma-separated clutch list (e.g. inboard,outboard_e).
        #[arg(long, value_parser = parse_pattern)]
        pattern: PatternSpec,
        /// Pa
        #[arg(long, default_value_t = 3100.0)]
        pressure: f64,
    },
    /// Mode 1 payload displacement per direction.
    Workspace {
        #[arg(long, default_value_t = 1700.0)]
        pressure: f64,
        /// Comma-separated; all nine when omitted.
        #[arg(long, value_delimiter = ',')]
        directions: Vec<DoFDirection>,
    },
    /// Mode 1 launches, trajectories and the force table.
    Launch {
        #[arg(long, value_delimiter = ',', required = true)]
        directions: Vec<DoFDirection>,
        /// Pa; per-direction trial pressure when omitted.
        #[arg(long)]
        pressure: Option<f64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Gaussian marker noise per trial (m).
        #[arg(long, default_value_t = 0.0)]
        marker_noise: f64,
        #[arg(long, default_value_t = actuation::DEFAULT_WINDOW)]
        window: usize,
        /// Payload mass (kg).
        #[arg(long, default_value_t = Payload::default().mass)]
        mass: f64,
        /// Payload diameter (m).
        #[arg(long, default_value_t = Payload::default().diameter)]
        diameter: f64,
    },
    /// Mode 2 plate tilt and release.
    Mode2 {
        #[arg(long, value_delimiter = ',', value_parser = parse_clutch, default_value = "outboard_e")]
        clutches: Vec<ClutchId>,
        #[arg(long, default_value_t = 3100.0)]
        pressure: f64,
        #[arg(long, default_value_t = 6)]
        steps: usize,
        #[arg(long, default_value_t = 0.82)]
        plate_mass: f64,
        #[arg(long, default_value_t = 0.1)]
        plate_half_extent: f64,
        #[arg(long, default_value_t = ReleaseConfig::default().damping_ratio)]
        damping_ratio: f64,
    },
    /// Align a measured cloud to a simulated one and report the RMSE.
    Compare {
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        simulated: PathBuf,
        /// Neighbours for statistical outlier removal; no filtering when omitted.
        #[arg(long)]
        outlier_k: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        outlier_std: f64,
        #[arg(long, default_value_t = IcpConfig::default().max_iters)]
        max_iters: usize,
    },
    /// Run a scenario file; its own out and seed fields apply.
    Run { scenario: PathBuf },
    /// Serve live sessions over HTTP and websockets.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn parse_clutch(s: &str) -> Result<ClutchId, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase())).map_err(|_| format!("unknown clutch {s:?}"))
}

fn parse_pattern(s: &str) -> Result<PatternSpec, String> {
    if let Ok(n) = s.parse::<NamedPattern>() {
        return Ok(PatternSpec::Named(n));
    }
    let clutches = s.split(',').filter(|c| !c.trim().is_empty()).map(parse_clutch).collect::<Result<Vec<_>, _>>()?;
    Ok(PatternSpec::Clutches(clutches))
}

fn spec_of(cli: Cli) -> Result<ScenarioSpec, CliError> {
    let kind = match cli.command {
        Cmd::Shape { pattern, pressure } => ScenarioKind::Shape { pattern, pressure },
        Cmd::Workspace { pressure, directions } => ScenarioKind::Workspace {
            pressure,
            directions: if directions.is_empty() { DoFDirection::ALL.to_vec() } else { directions },
            payload: Payload::default(),
        },
        Cmd::Launch { directions, pressure, trials, marker_noise, window, mass, diameter } => {
            ScenarioKind::Launch { directions, pressure, trials, payload: Payload { mass, diameter }, marker_noise, window }
        }
        Cmd::Mode2 { clutches, pressure, steps, plate_mass, plate_half_extent, damping_ratio } => ScenarioKind::Mode2 {
            clutches,
            pressure,
            steps,
            ramp_duration: 5.0,
            plate_mass,
            plate_half_extent,
            release: ReleaseConfig { damping_ratio, ..ReleaseConfig::default() },
        },
        Cmd::Compare { measured, simulated, outlier_k, outlier_std, max_iters } => ScenarioKind::CompareClouds {
            measured,
            simulated,
            outlier_filter: outlier_k.map(|k| OutlierFilter { k, std_multiplier: outlier_std }),
            icp: IcpConfig { max_iters, ..IcpConfig::default() },
        },
        Cmd::Run { scenario } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| CliError::Invalid(format!("scenario file {}: {e}", scenario.display())))?;
            return ScenarioSpec::from_json_str(&text);
        }
        Cmd::Serve { .. } => unreachable!("handled before"),
    };
    Ok(ScenarioSpec { kind, design: cli.design, config: cli.config, out: cli.out, seed: cli.seed })
}

fn serve(cli: &Cli, addr: SocketAddr) -> Result<(), CliError> {
    let probe = ScenarioSpec {
        kind: ScenarioKind::Shape { pattern: PatternSpec::Named(NamedPattern::Pyramid), pressure: 0.0 },
        design: cli.design.clone(),
        config: cli.config.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
    };
    probe.validate()?;
    let state = membrane_cli::server::AppState::new(probe.load_design()?, probe.load_config()?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("starting runtime", e))?;
    rt.block_on(membrane_cli::server::serve(addr, state)).map_err(|e| CliError::io(format!("serving on {addr}"), e))
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = serde_json::json!({ "error": { "kind": "invalid_input", "code": EXIT_INVALID, "message": e.render().to_string() } });
            eprintln!("{err}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    if let Cmd::Serve { addr } = cli.command {
        return match serve(&cli, addr) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        };
    }
    let result = spec_of(cli).and_then(|spec| run_scenario(&spec).map(|m| (spec, m)));
    match result {
        Ok((spec, manifest)) => {
            let summary = serde_json::json!({
                "kind": manifest.kind,
                "manifest": spec.out.join(membrane_cli::manifest::MANIFEST_FILE),
                "files": manifest.files.len(),
            });
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
