//! Scenario execution: build a protocol instance from a parsed config, run
//! the requested pipeline, and collect everything the emitter writes.

use sha2::{Digest, Sha256};

use heatline_core::heat::{
    average_heat, characteristic_grid, landauer_report, moment, tpm_distribution,
    CharacteristicSample, HeatDistribution, LandauerReport, ProtocolInstance, DEFAULT_GAP_TOL,
};
use heatline_core::interferometer::sample_theta_grid;
use heatline_core::ion::{
    build_protocol_with_tail_tol, circuit_theta, elimination_report, EliminationReport,
    IonParameters,
};
use heatline_core::operator::{identity, swap_matrix, HermitianOperator, HilbertSpace};
use heatline_core::parallel::par_map;
use heatline_core::spectroscopy::{reconstruct, time_grid, GapSet, ReconstructionResult, TimeGrid};
use heatline_core::thermal::{bose_occupation, number_operator, DEFAULT_TAIL_TOL};
use heatline_core::C64;

use crate::config::{parse_matrix, ConfigError, Mode, OutputKind, ScenarioConfig};

/// Execution failure: either the configuration was unusable or the numerics
/// refused (truncation, conditioning).
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(heatline_core::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Wrap a core error, classifying input-validation failures as config
/// errors anchored at `path`.
fn core_err(path: &str, e: heatline_core::Error) -> RunError {
    if e.is_numerical() {
        RunError::Numerical(e)
    } else {
        RunError::Config(ConfigError {
            path: path.to_string(),
            message: e.to_string(),
        })
    }
}

/// Identification block written into every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

/// Everything a scenario run produced.
pub struct ResultBundle {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub grid: Option<TimeGrid>,
    pub theta: Option<Vec<CharacteristicSample>>,
    pub distribution: Option<HeatDistribution>,
    pub reconstruction: Option<ReconstructionResult>,
    pub moments: Option<[f64; 4]>,
    pub landauer: Option<LandauerReport>,
    pub elimination: Option<EliminationReport>,
    pub provenance: Provenance,
}

/// SHA-256 of the canonical serialization of the effective config.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

struct BuiltInstance {
    inst: ProtocolInstance,
    ion: Option<IonParameters>,
}

fn build_instance(config: &ScenarioConfig) -> Result<BuiltInstance, RunError> {
    let system_state = config.system_state_operator()?;
    let tail_tol = config.tail_tolerance.unwrap_or(DEFAULT_TAIL_TOL);

    if config.mode == Mode::Ion {
        let osc = config.reservoir.oscillator.as_ref().expect("validated");
        let drive = config.protocol.ion.as_ref().expect("validated");
        let p = IonParameters {
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
        let mut inst = build_protocol_with_tail_tol(&p, drive.drive_time, system_state, tail_tol)
            .map_err(|e| core_err("protocol.ion", e))?;
        if let Some(tol) = config.gap_cluster_tol {
            inst = inst
                .with_gap_cluster_tol(tol)
                .map_err(|e| core_err("gap_cluster_tol", e))?;
        }
        return Ok(BuiltInstance { inst, ion: Some(p) });
    }

    // explicit-Hamiltonian or oscillator reservoir
    let (reservoir_h, beta, scale_tol) = if let Some(rows) = &config.reservoir.hamiltonian {
        let m = parse_matrix(rows, "reservoir.hamiltonian")?;
        let space = HilbertSpace::single("R", m.nrows());
        let h =
            HermitianOperator::new(m, space).map_err(|e| core_err("reservoir.hamiltonian", e))?;
        (
            h,
            config.reservoir.beta.expect("validated"),
            DEFAULT_GAP_TOL,
        )
    } else {
        let osc = config.reservoir.oscillator.as_ref().expect("validated");
        // tail check only; the Gibbs state of ωN at the matched beta below
        // reproduces the same truncated geometric populations
        heatline_core::thermal::thermal_oscillator(&heatline_core::thermal::OscillatorThermalSpec {
            tail_tolerance: tail_tol,
            ..heatline_core::thermal::OscillatorThermalSpec::new(
                osc.mode_frequency,
                osc.temperature,
                osc.fock_cutoff,
            )
        })
        .map_err(|e| core_err("reservoir.oscillator", e))?;
        let dim = osc.fock_cutoff + 1;
        let h = HermitianOperator::new(
            number_operator(dim) * C64::new(osc.mode_frequency, 0.0),
            HilbertSpace::single("R", dim),
        )
        .map_err(|e| core_err("reservoir.oscillator", e))?;
        let nbar = bose_occupation(osc.mode_frequency, osc.temperature);
        let ratio = (nbar / (nbar + 1.0)).max(1e-300);
        let beta = -ratio.ln() / osc.mode_frequency;
        (h, beta, DEFAULT_GAP_TOL * osc.mode_frequency)
    };

    let dim_r = reservoir_h.dim();
    let dim_s = system_state.dim();
    let protocol = if let Some(rows) = &config.protocol.matrix {
        let m = parse_matrix(rows, "protocol.matrix")?;
        if m.nrows() != dim_r * dim_s {
            return Err(ConfigError {
                path: "protocol.matrix".into(),
                message: format!(
                    "acts on dimension {}, but reservoir ⊗ system has {}",
                    m.nrows(),
                    dim_r * dim_s
                ),
            }
            .into());
        }
        m
    } else {
        match config.protocol.preset.as_deref().expect("validated") {
            "identity" => identity(dim_r * dim_s),
            "swap" => {
                if dim_r != dim_s {
                    return Err(ConfigError {
                        path: "protocol.preset".into(),
                        message: format!(
                            "swap needs equal dimensions, got reservoir {dim_r} and system {dim_s}"
                        ),
                    }
                    .into());
                }
                swap_matrix(dim_r)
            }
            other => {
                return Err(ConfigError {
                    path: "protocol.preset".into(),
                    message: format!("unknown preset `{other}`"),
                }
                .into())
            }
        }
    };

    let mut inst = ProtocolInstance::from_matrix(protocol, reservoir_h, beta, system_state)
        .map_err(|e| core_err("protocol", e))?;
    let tol = config.gap_cluster_tol.unwrap_or(scale_tol);
    inst = inst
        .with_gap_cluster_tol(tol)
        .map_err(|e| core_err("gap_cluster_tol", e))?;
    Ok(BuiltInstance { inst, ion: None })
}

/// Run one scenario. Deterministic given (config, seed): the RNG is seeded
/// per grid point and the pipeline is otherwise pure.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultBundle, RunError> {
    let built = build_instance(config)?;
    let inst = &built.inst;
    let seed = config.effective_seed();

    let gaps = GapSet::from_hamiltonian(inst.reservoir_h(), inst.gap_cluster_tol())
        .map_err(RunError::Numerical)?;

    let (times, grid) = if let Some(ts) = &config.time_grid.explicit {
        (ts.clone(), None)
    } else {
        let requested = config.time_grid.auto.as_ref().expect("validated").points;
        let grid = time_grid(&gaps, requested.max(2 * gaps.len())).map_err(RunError::Numerical)?;
        (grid.times.clone(), Some(grid))
    };

    let theta = if config.wants(OutputKind::ThetaSamples) {
        let samples = match config.mode {
            Mode::Exact => characteristic_grid(inst, &times),
            Mode::Shots => sample_theta_grid(inst, &times, config.effective_shots(), seed)
                .map_err(RunError::Numerical)?
                .into_iter()
                .map(CharacteristicSample::from)
                .collect(),
            Mode::Ion => {
                let p = built.ion.as_ref().expect("ion mode carries parameters");
                let results = par_map(times.clone(), |t| {
                    circuit_theta(p, inst, t).map(|theta| CharacteristicSample::exact(t, theta))
                });
                results
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(RunError::Numerical)?
            }
        };
        Some(samples)
    } else {
        None
    };

    let distribution =
        if config.wants(OutputKind::Distribution) || config.wants(OutputKind::Moments) {
            Some(tpm_distribution(inst).map_err(RunError::Numerical)?)
        } else {
            None
        };

    let reconstruction = match (&theta, config.wants(OutputKind::Distribution)) {
        (Some(samples), true) => Some(reconstruct(samples, &gaps).map_err(RunError::Numerical)?),
        _ => None,
    };

    let moments = if config.wants(OutputKind::Moments) {
        let dist = distribution.as_ref().expect("computed above");
        Some([
            moment(dist, 1),
            moment(dist, 2),
            moment(dist, 3),
            moment(dist, 4),
        ])
    } else {
        None
    };

    let landauer = if config.wants(OutputKind::Landauer) {
        Some(landauer_report(inst))
    } else {
        None
    };

    let elimination = if config.wants(OutputKind::Elimination) {
        let p = built
            .ion
            .as_ref()
            .expect("validated: elimination needs ion mode");
        let period = std::f64::consts::TAU / p.conditional_shift().abs();
        Some(elimination_report(p, period, inst.reservoir_state()).map_err(RunError::Numerical)?)
    } else {
        None
    };

    Ok(ResultBundle {
        mode: config.mode,
        times,
        grid,
        theta,
        distribution,
        reconstruction,
        moments,
        landauer,
        elimination,
        provenance: Provenance {
            config_sha256: config_hash(config),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Scalar headline numbers for sweep summaries.
pub fn headline(inst_bundle: &ResultBundle) -> (Option<f64>, Option<f64>) {
    let avg = inst_bundle
        .moments
        .map(|m| m[0])
        .or(inst_bundle.landauer.map(|l| l.average_heat));
    let slack = inst_bundle.landauer.map(|l| l.slack);
    (avg, slack)
}

/// Average heat straight from an instance, used by sweeps when neither
/// moments nor landauer were requested.
pub fn average_heat_of(config: &ScenarioConfig) -> Result<f64, RunError> {
    let built = build_instance(config)?;
    Ok(average_heat(&built.inst))
}
