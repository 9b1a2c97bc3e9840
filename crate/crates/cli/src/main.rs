//! `heatline`: scenario runner for the heat-distribution interferometry
//! simulator.
//!
//! Subcommands: `run` executes one scenario, `validate` checks a scenario
//! file without running it, `sweep` reruns a scenario over a list of values
//! for one config field. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure.

mod config;
mod emit;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_scenario, ConfigError, Mode, ScenarioConfig};
use runner::{run_scenario, RunError};

/// Environment variable overriding the scenario seed (the `--seed` flag
/// still wins).
const SEED_ENV: &str = "HEATLINE_SEED";

#[derive(Parser)]
#[command(
    name = "heatline",
    version,
    about = "Heat-distribution interferometry scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write theta.csv, distribution.csv, summary.json.
    Run {
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the shots-per-phase count.
        #[arg(long)]
        shots: Option<u64>,
        /// Override the auto time-grid point count.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Parse and validate a scenario file, printing derived quantities.
    Validate { scenario: PathBuf },
    /// Rerun a scenario over a list of values for one config field.
    Sweep {
        scenario: PathBuf,
        /// Dotted path of the field to vary, e.g. `reservoir.beta` or `shots`.
        #[arg(long)]
        param: String,
        /// Comma-separated values substituted at the path.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            shots,
            points,
        } => cmd_run(&scenario, &out, seed, shots, points),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            seed,
            shots,
        } => cmd_sweep(&scenario, &param, &values, &out, seed, shots),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[derive(Debug)]
enum AppError {
    Config(ConfigError),
    Numerical(heatline_core::Error),
    Io(std::io::Error, PathBuf),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "{e}"),
            AppError::Numerical(e) => write!(f, "numerical failure: {e}"),
            AppError::Io(e, path) => write!(f, "i/o failure at {}: {e}", path.display()),
        }
    }
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Io(..) => 1,
        }
    }
}

impl From<RunError> for AppError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => AppError::Config(c),
            RunError::Numerical(n) => AppError::Numerical(n),
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

fn read_file(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::Io(e, path.to_path_buf()))
}

/// Load a scenario and apply the seed/shots/points override chain
/// (flag > environment > file > default).
fn load_scenario(
    path: &Path,
    seed_flag: Option<u64>,
    shots_flag: Option<u64>,
    points_flag: Option<usize>,
) -> Result<ScenarioConfig, AppError> {
    let text = read_file(path)?;
    let mut config = config::parse_scenario_unvalidated(&text)?;

    let env_seed = std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.parse::<u64>().ok());
    if let Some(seed) = seed_flag.or(env_seed) {
        config.seed = Some(seed);
    }
    if let Some(shots) = shots_flag {
        config.shots = Some(shots);
    }
    if let Some(points) = points_flag {
        config.time_grid = config::TimeGridSource {
            auto: Some(config::AutoGrid { points }),
            explicit: None,
        };
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    shots: Option<u64>,
    points: Option<usize>,
) -> Result<(), AppError> {
    let config = load_scenario(scenario, seed, shots, points)?;
    let bundle = run_scenario(&config)?;
    let written = emit::emit(&bundle, out).map_err(|e| AppError::Io(e, out.to_path_buf()))?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_validate(scenario: &Path) -> Result<(), AppError> {
    let text = read_file(scenario)?;
    let config = parse_scenario(&text)?;
    println!(
        "ok: mode {:?}, seed {}",
        config.mode,
        config.effective_seed()
    );
    if config.mode == Mode::Ion {
        let osc = config.reservoir.oscillator.as_ref().expect("validated");
        let drive = config.protocol.ion.as_ref().expect("validated");
        let p = heatline_core::ion::IonParameters {
            ion_mass: drive.ion_mass,
            mode_frequency: osc.mode_frequency,
            wavelength: drive.wavelength,
            beam_angle: drive.beam_angle,
            rabi_s: drive.rabi_s,
            rabi_ac: drive.rabi_ac,
            detuning_ac: drive.detuning_ac,
            temperature: osc.temperature,
            fock_cutoff: osc.fock_cutoff,
        };
        p.validate().map_err(|e| {
            AppError::Config(ConfigError {
                path: "protocol.ion".into(),
                message: e.to_string(),
            })
        })?;
        println!(
            "ion parameters: lamb_dicke {:.4}, conditional shift 2pi x {:.1} Hz per phonon, \
             adiabaticity ratio {:.2}, mean phonon number {:.3}",
            p.lamb_dicke(),
            p.conditional_shift() / std::f64::consts::TAU,
            p.adiabaticity_ratio(),
            p.mean_phonon_number()
        );
    }
    Ok(())
}

/// Set a dotted path inside a JSON document to a scalar parsed from `raw`
/// (JSON literal first, bare string as fallback).
fn set_path(doc: &mut serde_json::Value, path: &str, raw: &str) -> Result<(), ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut cursor = doc;
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if last {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(segment.to_string(), value);
                    return Ok(());
                }
                _ => {
                    return Err(ConfigError {
                        path: path.to_string(),
                        message: format!("`{segment}` is not addressable in a non-object"),
                    })
                }
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map.get_mut(*segment).ok_or_else(|| ConfigError {
                path: path.to_string(),
                message: format!("missing intermediate field `{segment}`"),
            })?,
            _ => {
                return Err(ConfigError {
                    path: path.to_string(),
                    message: format!("`{segment}` is not addressable in a non-object"),
                })
            }
        };
    }
    unreachable!("empty paths are rejected by split")
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '+' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_sweep(
    scenario: &Path,
    param: &str,
    values: &[String],
    out: &Path,
    seed: Option<u64>,
    shots: Option<u64>,
) -> Result<(), AppError> {
    if param.is_empty() {
        return Err(AppError::Config(ConfigError {
            path: "--param".into(),
            message: "must name a config field".into(),
        }));
    }
    let text = read_file(scenario)?;
    // syntax-check the base up front; per-point semantic validation runs
    // after overrides are applied
    config::parse_scenario_unvalidated(&text)?;
    let base: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        AppError::Config(ConfigError {
            path: "<document>".into(),
            message: e.to_string(),
        })
    })?;

    // build every point's config up front so config errors win over partial output
    let mut points: Vec<(String, ScenarioConfig)> = Vec::with_capacity(values.len());
    for raw in values {
        let mut doc = base.clone();
        set_path(&mut doc, param, raw)?;
        let mut config: ScenarioConfig = serde_json::from_value(doc).map_err(|e| {
            AppError::Config(ConfigError {
                path: param.to_string(),
                message: e.to_string(),
            })
        })?;
        let env_seed = std::env::var(SEED_ENV)
            .ok()
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(s) = seed.or(env_seed) {
            config.seed = Some(s);
        }
        if let Some(s) = shots {
            config.shots = Some(s);
        }
        config.validate()?;
        points.push((raw.clone(), config));
    }

    // run the sweep points in parallel (pure pipeline per point)
    type SweepRow = (String, f64, Option<f64>);
    let results: Vec<Result<SweepRow, RunError>> =
        heatline_core::parallel::par_map(points, |(raw, config)| {
            let bundle = run_scenario(&config)?;
            let dir_name = format!("{}={}", sanitize(param), sanitize(&raw));
            let dir = out.join(dir_name);
            emit::emit(&bundle, &dir).map_err(|e| {
                RunError::Config(ConfigError {
                    path: dir.display().to_string(),
                    message: format!("i/o failure: {e}"),
                })
            })?;
            let (avg, slack) = runner::headline(&bundle);
            let avg = match avg {
                Some(a) => a,
                None => runner::average_heat_of(&config)?,
            };
            Ok((raw, avg, slack))
        });

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }

    let mut text = String::from("value,average_heat,slack\n");
    for (raw, avg, slack) in &rows {
        let slack_field = slack.map(emit::fmt_f64).unwrap_or_default();
        text.push_str(&format!("{raw},{},{slack_field}\n", emit::fmt_f64(*avg)));
    }
    std::fs::create_dir_all(out).map_err(|e| AppError::Io(e, out.to_path_buf()))?;
    let sweep_path = out.join("sweep.csv");
    std::fs::write(&sweep_path, text).map_err(|e| AppError::Io(e, sweep_path.clone()))?;
    println!("wrote {}", sweep_path.display());
    Ok(())
}
