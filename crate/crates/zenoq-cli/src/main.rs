//! Command-line front end: experiment configs in, CSV/JSON data out.
//!
//! Commands: `rabi`, `decay`, `calibrate`, `fit`, `transpile`. Each takes a
//! JSON config file; scalar fields can be overridden by flags. Snapshot
//! references resolve as a bundled name, a file path, or a file under
//! `$ZENOQ_SNAPSHOT_DIR`. Exit codes: 0 success, 1 runtime failure, 2
//! configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use zenoq::experiments::{
    self, calibration_matrix_for, decay_sweep, fit_with_retry, parse_sweep_csv,
    rabi_mitigation_report, rabi_sweep, sweep_csv, Backend, FitReport,
};
use zenoq::simulator::NoiseModel;
use zenoq::transpiler::lower;
use zenoq::zeno::{DecayModel, SurvivalPoint, DEFAULT_SHOTS};
use zenoq::{Circuit, DeviceSnapshot};

const SNAPSHOT_DIR_ENV: &str = "ZENOQ_SNAPSHOT_DIR";

#[derive(Parser)]
#[command(name = "zenoq", about = "Quantum Zeno experiment toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rabi-evolution survival sweep over a θ list and an N range.
    Rabi(RabiArgs),
    /// Free-decay survival sweep over a time grid, with a Zeno-time fit.
    Decay(DecayArgs),
    /// Readout/SPAM calibration plus a mitigation comparison report.
    Calibrate(CalibrateArgs),
    /// Fit the Zeno time to an existing sweep CSV.
    Fit(FitArgs),
    /// Lower a circuit JSON onto a device snapshot.
    Transpile(TranspileArgs),
}

#[derive(Args)]
struct CommonOverrides {
    /// Config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's shot count.
    #[arg(long)]
    shots: Option<u64>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's snapshot reference.
    #[arg(long)]
    snapshot: Option<String>,
    /// Output directory (default: current directory).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RabiArgs {
    #[command(flatten)]
    common: CommonOverrides,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    common: CommonOverrides,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonOverrides,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV produced by the decay command.
    #[arg(long)]
    input: PathBuf,
    /// Number of intermediate measurements the sweep used.
    #[arg(long)]
    n: u32,
    /// Output JSON path (default: zeno_fit.json beside the input).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TranspileArgs {
    /// Circuit JSON file.
    #[arg(long)]
    circuit: PathBuf,
    /// Snapshot reference (bundled name or path).
    #[arg(long)]
    snapshot: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Config documents
// ---------------------------------------------------------------------------

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RabiConfig {
    schema: String,
    thetas: Vec<f64>,
    n_min: u32,
    n_max: u32,
    #[serde(default = "default_shots")]
    shots: u64,
    backend: String,
    snapshot: String,
    #[serde(default)]
    mitigation: bool,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayConfig {
    schema: String,
    t_grid_us: Vec<f64>,
    n_measurements: u32,
    model: DecayModelConfig,
    #[serde(default = "default_shots")]
    shots: u64,
    backend: String,
    snapshot: String,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DecayModelConfig {
    Pseudomode { g_rad_per_us: f64 },
    Snapshot,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateConfig {
    schema: String,
    m_qubits: usize,
    #[serde(default = "default_shots")]
    shots: u64,
    snapshot: String,
    /// Rabi angle of the experiment the mitigation report compares on.
    #[serde(default = "default_theta")]
    theta: f64,
    /// "readout" (default) or "full" noise during calibration/experiment.
    #[serde(default = "default_noise")]
    noise: String,
    seed: Option<u64>,
}

fn default_theta() -> f64 {
    std::f64::consts::FRAC_PI_2
}

fn default_noise() -> String {
    "readout".into()
}

// ---------------------------------------------------------------------------
// Error plumbing: config errors exit 2, runtime errors exit 1
// ---------------------------------------------------------------------------

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }
    fn runtime(msg: impl Into<String>) -> CliError {
        CliError::Runtime(msg.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Resolve a snapshot reference: bundled name (including synthetic
/// `linear-<n>`), then literal path, then a file under $ZENOQ_SNAPSHOT_DIR.
fn resolve_snapshot(reference: &str) -> CliResult<DeviceSnapshot> {
    if let Some(snap) = DeviceSnapshot::builtin(reference) {
        return Ok(snap);
    }
    if let Some(n) = reference
        .strip_prefix("linear-")
        .and_then(|s| s.parse::<usize>().ok())
    {
        if (1..=16).contains(&n) {
            return Ok(DeviceSnapshot::linear(n));
        }
    }
    let direct = PathBuf::from(reference);
    let candidate = if direct.exists() {
        Some(direct)
    } else {
        std::env::var_os(SNAPSHOT_DIR_ENV).and_then(|dir| {
            let p = PathBuf::from(dir).join(reference);
            p.exists().then_some(p)
        })
    };
    let Some(path) = candidate else {
        return Err(CliError::config(format!(
            "snapshot '{reference}' is neither a bundled name ({}) nor an existing file \
             (also tried ${SNAPSHOT_DIR_ENV})",
            DeviceSnapshot::builtin_names().join(", ")
        )));
    };
    let text = read_to_string(&path)?;
    DeviceSnapshot::from_json(&text)
        .map_err(|e| CliError::config(format!("snapshot {}: {e}", path.display())))
}

fn check_schema(path: &Path, expected: &str, found: &str) -> CliResult<()> {
    if found != expected {
        return Err(CliError::config(format!(
            "{}: schema '{found}' is not '{expected}'",
            path.display()
        )));
    }
    Ok(())
}

fn parse_backend(s: &str) -> CliResult<Backend> {
    s.parse::<Backend>().map_err(|e| CliError::config(e.to_string()))
}

fn require_seed(seed: Option<u64>, backend: Backend) -> CliResult<u64> {
    match (seed, backend) {
        (Some(s), _) => Ok(s),
        (None, Backend::Ideal) => Ok(0),
        (None, _) => Err(CliError::config(
            "a seed is mandatory for sampling and noisy runs",
        )),
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_rabi(args: &RabiArgs) -> CliResult<()> {
    let text = read_to_string(&args.common.config)?;
    let mut cfg: RabiConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", args.common.config.display())))?;
    check_schema(&args.common.config, "zenoq-rabi-v1", &cfg.schema)?;
    if let Some(s) = args.common.shots {
        cfg.shots = s;
    }
    if let Some(s) = args.common.seed {
        cfg.seed = Some(s);
    }
    if let Some(s) = &args.common.snapshot {
        cfg.snapshot = s.clone();
    }
    if cfg.thetas.is_empty() || cfg.n_min > cfg.n_max {
        return Err(CliError::config("empty theta list or inverted N range"));
    }
    let backend = parse_backend(&cfg.backend)?;
    let seed = require_seed(cfg.seed, backend)?;
    let snapshot = resolve_snapshot(&cfg.snapshot)?;
    let ns: Vec<u32> = (cfg.n_min..=cfg.n_max).collect();
    let rows = rabi_sweep(&cfg.thetas, &ns, cfg.shots, backend, &snapshot, seed)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    write_file(&args.common.out_dir.join("rabi_sweep.csv"), &sweep_csv(&rows))?;
    if cfg.mitigation {
        let noise = NoiseModel::from_snapshot(&snapshot);
        for (ti, &theta) in cfg.thetas.iter().enumerate() {
            for n in ns.iter().copied().filter(|&n| n >= 1) {
                let report = rabi_mitigation_report(
                    theta,
                    n,
                    cfg.shots,
                    &noise,
                    experiments::derive_seed(seed, ti as u64, n as u64),
                )
                .map_err(|e| CliError::runtime(e.to_string()))?;
                let name = format!("mitigation_theta{ti}_n{n}.json");
                write_file(&args.common.out_dir.join(name), &report.to_json())?;
            }
        }
    }
    Ok(())
}

fn cmd_decay(args: &DecayArgs) -> CliResult<()> {
    let text = read_to_string(&args.common.config)?;
    let mut cfg: DecayConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", args.common.config.display())))?;
    check_schema(&args.common.config, "zenoq-decay-v1", &cfg.schema)?;
    if let Some(s) = args.common.shots {
        cfg.shots = s;
    }
    if let Some(s) = args.common.seed {
        cfg.seed = Some(s);
    }
    if let Some(s) = &args.common.snapshot {
        cfg.snapshot = s.clone();
    }
    if cfg.t_grid_us.is_empty() {
        return Err(CliError::config("empty time grid"));
    }
    let backend = parse_backend(&cfg.backend)?;
    let seed = require_seed(cfg.seed, backend)?;
    let snapshot = resolve_snapshot(&cfg.snapshot)?;
    let model = match cfg.model {
        DecayModelConfig::Pseudomode { g_rad_per_us } => {
            DecayModel::Pseudomode { g_rad_per_us }
        }
        DecayModelConfig::Snapshot => DecayModel::SnapshotNoise,
    };
    let sweep = decay_sweep(
        &cfg.t_grid_us,
        cfg.n_measurements,
        &model,
        cfg.shots,
        backend,
        &snapshot,
        seed,
    )
    .map_err(|e| match e {
        zenoq::Error::InvalidArgument(_)
        | zenoq::Error::Unsupported(_)
        | zenoq::Error::InfeasibleSegment { .. }
        | zenoq::Error::AncillaBudget { .. } => CliError::config(e.to_string()),
        other => CliError::runtime(other.to_string()),
    })?;
    write_file(&args.common.out_dir.join("decay_sweep.csv"), &sweep_csv(&sweep.rows))?;
    let report = FitReport {
        device: snapshot.name.clone(),
        qubit: sweep.home_qubit,
        n_measurements: cfg.n_measurements,
        obs_time_us: sweep.obs_time_us,
        t_us: sweep.fit.t_us,
        sigma_us: sweep.fit.sigma_us,
        residual_norm: sweep.fit.residual_norm,
    };
    write_file(&args.common.out_dir.join("zeno_fit.json"), &report.to_json())?;
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let text = read_to_string(&args.common.config)?;
    let mut cfg: CalibrateConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", args.common.config.display())))?;
    check_schema(&args.common.config, "zenoq-calibrate-v1", &cfg.schema)?;
    if let Some(s) = args.common.shots {
        cfg.shots = s;
    }
    if let Some(s) = args.common.seed {
        cfg.seed = Some(s);
    }
    if let Some(s) = &args.common.snapshot {
        cfg.snapshot = s.clone();
    }
    if cfg.m_qubits == 0 || cfg.m_qubits > zenoq::mitigation::MAX_CALIBRATION_QUBITS {
        return Err(CliError::config(format!(
            "m_qubits must be in 1..={}, got {}",
            zenoq::mitigation::MAX_CALIBRATION_QUBITS,
            cfg.m_qubits
        )));
    }
    let seed = require_seed(cfg.seed, Backend::Noisy)?;
    let snapshot = resolve_snapshot(&cfg.snapshot)?;
    let noise = match cfg.noise.as_str() {
        "readout" => NoiseModel::from_snapshot(&snapshot)
            .with_relaxation(false)
            .with_dephasing(false),
        "full" => NoiseModel::from_snapshot(&snapshot),
        other => {
            return Err(CliError::config(format!(
                "noise must be 'readout' or 'full', got '{other}'"
            )))
        }
    };
    let matrix = calibration_matrix_for(cfg.m_qubits, &noise, cfg.shots, seed)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    write_file(&args.common.out_dir.join("calibration_matrix.csv"), &matrix.to_csv())?;
    let n = cfg.m_qubits as u32 - 1;
    if n >= 1 {
        let report = rabi_mitigation_report(cfg.theta, n, cfg.shots, &noise, seed)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        write_file(&args.common.out_dir.join("mitigation_report.json"), &report.to_json())?;
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let text = read_to_string(&args.input)?;
    let rows = parse_sweep_csv(&text).map_err(|e| CliError::config(e.to_string()))?;
    if args.n == 0 {
        return Err(CliError::config("n must be at least 1"));
    }
    let points: Vec<SurvivalPoint> = rows
        .iter()
        .map(|r| SurvivalPoint {
            t_us: r.theta_or_t,
            n_measurements: r.n,
            p: r.p,
            stderr: r.stderr,
        })
        .collect();
    let fit = fit_with_retry(&points, args.n).map_err(|e| CliError::runtime(e.to_string()))?;
    let obs_time_us = points.iter().map(|p| p.t_us).fold(0.0, f64::max);
    let report = FitReport {
        device: "from-csv".into(),
        qubit: 0,
        n_measurements: args.n,
        obs_time_us,
        t_us: fit.t_us,
        sigma_us: fit.sigma_us,
        residual_norm: fit.residual_norm,
    };
    let out = args.out.clone().unwrap_or_else(|| {
        args.input
            .parent()
            .unwrap_or(Path::new("."))
            .join("zeno_fit.json")
    });
    write_file(&out, &report.to_json())
}

fn cmd_transpile(args: &TranspileArgs) -> CliResult<()> {
    let text = read_to_string(&args.circuit)?;
    let circuit = Circuit::from_json(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", args.circuit.display())))?;
    let snapshot = resolve_snapshot(&args.snapshot)?;
    let lowered = lower(&circuit, &snapshot).map_err(|e| CliError::runtime(e.to_string()))?;
    write_file(&args.out_dir.join("lowered_circuit.json"), &lowered.circuit.to_json())?;
    #[derive(serde::Serialize)]
    struct ScheduleReport<'a> {
        total_duration_dt: u64,
        measure_start_dt: u64,
        layout: &'a [usize],
        delay_adjustments: &'a [zenoq::transpiler::DelayAdjustment],
    }
    let report = ScheduleReport {
        total_duration_dt: lowered.schedule.total_duration,
        measure_start_dt: lowered.schedule.measure_start(&lowered.circuit),
        layout: lowered.layout.as_slice(),
        delay_adjustments: &lowered.delay_adjustments,
    };
    write_file(
        &args.out_dir.join("schedule_report.json"),
        &serde_json::to_string_pretty(&report).expect("schedule report serialization"),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rabi(args) => cmd_rabi(args),
        Command::Decay(args) => cmd_decay(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Transpile(args) => cmd_transpile(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
