//! Scenario configuration: JSON model, validation, and defaults.
//!
//! The format is documented in `docs/scenario_schema.md`. Validation errors
//! carry the offending field path so they can be fixed without reading this
//! file.

use serde::{Deserialize, Serialize};

use heatline_core::operator::{basis_ket, plus_ket, CMat, DensityOperator, HilbertSpace};
use heatline_core::C64;

/// Current schema version accepted by this binary.
pub const SCHEMA_VERSION: u32 = 1;

/// Defaults, mirrored in the schema document.
pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_SHOTS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

/// A scenario-validation failure anchored to the offending field path.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error at `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Complex number as either a bare real or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexEntry {
    pub fn to_c64(self) -> C64 {
        match self {
            ComplexEntry::Real(re) => C64::new(re, 0.0),
            ComplexEntry::Pair([re, im]) => C64::new(re, im),
        }
    }
}

pub type JsonMatrix = Vec<Vec<ComplexEntry>>;

/// Parse a JSON matrix into a dense complex matrix, checking squareness.
pub fn parse_matrix(rows: &JsonMatrix, path: &str) -> Result<CMat, ConfigError> {
    let n = rows.len();
    if n == 0 {
        return Err(err(path, "matrix must not be empty"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(err(
                &format!("{path}[{i}]"),
                format!("row has {} entries, expected {n}", row.len()),
            ));
        }
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j].to_c64()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Shots,
    Ion,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorReservoir {
    /// Mode angular frequency ω, rad/s.
    pub mode_frequency: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Highest retained Fock level N_max.
    pub fock_cutoff: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSource {
    /// Explicit reservoir Hamiltonian (square complex matrix, ħ = 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<JsonMatrix>,
    /// Inverse temperature for an explicit Hamiltonian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Thermal harmonic mode (SI units).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillator: Option<OscillatorReservoir>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemStateSource {
    /// One of `zero`, `one`, `plus`, `maximally_mixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Dimension for `maximally_mixed` (the qubit presets fix it to 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Explicit density matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<JsonMatrix>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IonDrive {
    /// Ion mass, kg.
    pub ion_mass: f64,
    /// Drive wavelength, m.
    pub wavelength: f64,
    /// Beam angle to the oscillation direction, rad.
    pub beam_angle: f64,
    /// Sideband carrier Rabi frequency Ω_S, rad/s.
    pub rabi_s: f64,
    /// Ancilla auxiliary-transition Rabi frequency Ω_ac, rad/s.
    pub rabi_ac: f64,
    /// Detuning δ_ac, rad/s, signed and nonzero.
    pub detuning_ac: f64,
    /// Blue-sideband drive time, s.
    pub drive_time: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSource {
    /// One of `identity`, `swap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Explicit unitary on reservoir ⊗ system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<JsonMatrix>,
    /// Physical drive parameters (ion mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ion: Option<IonDrive>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AutoGrid {
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto: Option<AutoGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<f64>>,
}

impl Default for TimeGridSource {
    fn default() -> Self {
        Self {
            auto: Some(AutoGrid {
                points: DEFAULT_GRID_POINTS,
            }),
            explicit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    ThetaSamples,
    Distribution,
    Moments,
    Landauer,
    Elimination,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![
        OutputKind::ThetaSamples,
        OutputKind::Distribution,
        OutputKind::Moments,
        OutputKind::Landauer,
    ]
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub mode: Mode,
    pub reservoir: ReservoirSource,
    pub system_state: SystemStateSource,
    pub protocol: ProtocolSource,
    #[serde(default)]
    pub time_grid: TimeGridSource,
    /// Shots per analysis phase per grid point (shots mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    /// Absolute energy-clustering tolerance; defaults to 1e-9 (scaled by ω
    /// in ion/oscillator scenarios).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_cluster_tol: Option<f64>,
    /// Maximum tolerated truncated thermal tail; defaults to 1e-6.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
}

impl ScenarioConfig {
    /// Structural validation with field-path errors. Numerical validation
    /// (Hermiticity, unitarity, positivity) happens when operators are
    /// built from the parsed matrices.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(err(
                "schema_version",
                format!(
                    "unsupported version {}, this build reads {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }

        // reservoir: exactly one source
        let explicit = self.reservoir.hamiltonian.is_some();
        let oscillator = self.reservoir.oscillator.is_some();
        if explicit == oscillator {
            return Err(err(
                "reservoir",
                "specify exactly one of `hamiltonian`+`beta` or `oscillator`",
            ));
        }
        if explicit {
            match self.reservoir.beta {
                None => {
                    return Err(err(
                        "reservoir.beta",
                        "required with an explicit Hamiltonian",
                    ))
                }
                Some(beta) if !(beta >= 0.0 && beta.is_finite()) => {
                    return Err(err(
                        "reservoir.beta",
                        format!("must be finite and nonnegative, got {beta}"),
                    ))
                }
                _ => {}
            }
        } else if self.reservoir.beta.is_some() {
            return Err(err(
                "reservoir.beta",
                "not allowed with an oscillator reservoir",
            ));
        }
        if let Some(osc) = &self.reservoir.oscillator {
            if osc.mode_frequency.is_nan() || osc.mode_frequency <= 0.0 {
                return Err(err(
                    "reservoir.oscillator.mode_frequency",
                    "must be positive",
                ));
            }
            if osc.temperature.is_nan() || osc.temperature <= 0.0 {
                return Err(err("reservoir.oscillator.temperature", "must be positive"));
            }
            if osc.fock_cutoff < 1 {
                return Err(err(
                    "reservoir.oscillator.fock_cutoff",
                    "must be at least 1",
                ));
            }
        }

        // system state: exactly one source
        match (&self.system_state.preset, &self.system_state.matrix) {
            (Some(preset), None) => {
                let known = ["zero", "one", "plus", "maximally_mixed"];
                if !known.contains(&preset.as_str()) {
                    return Err(err(
                        "system_state.preset",
                        format!("unknown preset `{preset}`; expected one of {known:?}"),
                    ));
                }
                if preset != "maximally_mixed" && self.system_state.dim.is_some_and(|d| d != 2) {
                    return Err(err(
                        "system_state.dim",
                        "qubit presets fix the dimension to 2",
                    ));
                }
            }
            (None, Some(_)) => {}
            _ => {
                return Err(err(
                    "system_state",
                    "specify exactly one of `preset` or `matrix`",
                ));
            }
        }

        // protocol: exactly one source, consistent with the mode
        let sources = [
            self.protocol.preset.is_some(),
            self.protocol.matrix.is_some(),
            self.protocol.ion.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(err(
                "protocol",
                "specify exactly one of `preset`, `matrix`, or `ion`",
            ));
        }
        if let Some(preset) = &self.protocol.preset {
            if !["identity", "swap"].contains(&preset.as_str()) {
                return Err(err(
                    "protocol.preset",
                    format!("unknown preset `{preset}`; expected `identity` or `swap`"),
                ));
            }
        }
        match self.mode {
            Mode::Ion => {
                if self.protocol.ion.is_none() {
                    return Err(err(
                        "protocol.ion",
                        "ion mode requires physical drive parameters",
                    ));
                }
                if self.reservoir.oscillator.is_none() {
                    return Err(err(
                        "reservoir.oscillator",
                        "ion mode requires an oscillator reservoir",
                    ));
                }
            }
            Mode::Shots => {
                if self.protocol.ion.is_some() {
                    return Err(err("protocol.ion", "ion drives run in ion mode"));
                }
            }
            Mode::Exact => {
                if self.protocol.ion.is_some() {
                    return Err(err("protocol.ion", "ion drives run in ion mode"));
                }
            }
        }
        if let Some(ion) = &self.protocol.ion {
            for (name, v) in [
                ("ion_mass", ion.ion_mass),
                ("wavelength", ion.wavelength),
                ("rabi_s", ion.rabi_s),
                ("rabi_ac", ion.rabi_ac),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(err(
                        &format!("protocol.ion.{name}"),
                        format!("must be positive, got {v}"),
                    ));
                }
            }
            if ion.detuning_ac == 0.0 || !ion.detuning_ac.is_finite() {
                return Err(err(
                    "protocol.ion.detuning_ac",
                    "must be nonzero and finite",
                ));
            }
            if !(ion.drive_time >= 0.0 && ion.drive_time.is_finite()) {
                return Err(err("protocol.ion.drive_time", "must be nonnegative"));
            }
        }

        // time grid: exactly one source
        match (&self.time_grid.auto, &self.time_grid.explicit) {
            (Some(auto), None) => {
                if auto.points < 2 {
                    return Err(err("time_grid.auto.points", "need at least 2 points"));
                }
            }
            (None, Some(ts)) => {
                if ts.is_empty() {
                    return Err(err("time_grid.explicit", "must not be empty"));
                }
                if ts.iter().any(|t| !t.is_finite()) {
                    return Err(err("time_grid.explicit", "times must be finite"));
                }
            }
            _ => {
                return Err(err(
                    "time_grid",
                    "specify exactly one of `auto` or `explicit`",
                ))
            }
        }

        if self.mode == Mode::Shots {
            match self.shots {
                None => return Err(err("shots", "shots mode requires an explicit shot count")),
                Some(0) => return Err(err("shots", "shots mode needs a positive shot count")),
                _ => {}
            }
            if self.seed.is_none() {
                return Err(err(
                    "seed",
                    "shots mode requires a seed (file field, HEATLINE_SEED, or --seed)",
                ));
            }
        }
        if let Some(tol) = self.gap_cluster_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(err("gap_cluster_tol", "must be positive"));
            }
        }
        if let Some(tol) = self.tail_tolerance {
            if !(tol > 0.0 && tol <= 1.0) {
                return Err(err("tail_tolerance", "must lie in (0, 1]"));
            }
        }
        if self.outputs.is_empty() {
            return Err(err("outputs", "request at least one artifact"));
        }
        if self.outputs.contains(&OutputKind::Elimination) && self.mode != Mode::Ion {
            return Err(err(
                "outputs",
                "`elimination` is only available in ion mode",
            ));
        }
        Ok(())
    }

    pub fn effective_shots(&self) -> u64 {
        self.shots.unwrap_or(DEFAULT_SHOTS)
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn wants(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }

    /// Build the system density operator from its source.
    pub fn system_state_operator(&self) -> Result<DensityOperator, ConfigError> {
        if let Some(matrix) = &self.system_state.matrix {
            let m = parse_matrix(matrix, "system_state.matrix")?;
            let space = HilbertSpace::single("S", m.nrows());
            return DensityOperator::new(m, space)
                .map_err(|e| err("system_state.matrix", e.to_string()));
        }
        let preset = self.system_state.preset.as_deref().expect("validated");
        let state = match preset {
            "zero" => DensityOperator::from_pure(&basis_ket(2, 0), HilbertSpace::single("S", 2)),
            "one" => DensityOperator::from_pure(&basis_ket(2, 1), HilbertSpace::single("S", 2)),
            "plus" => DensityOperator::from_pure(&plus_ket(), HilbertSpace::single("S", 2)),
            "maximally_mixed" => {
                let dim = self.system_state.dim.unwrap_or(2);
                if dim < 1 {
                    return Err(err("system_state.dim", "must be at least 1"));
                }
                Ok(DensityOperator::maximally_mixed(HilbertSpace::single(
                    "S", dim,
                )))
            }
            other => {
                return Err(err(
                    "system_state.preset",
                    format!("unknown preset `{other}`"),
                ))
            }
        };
        state.map_err(|e| err("system_state", e.to_string()))
    }
}

/// Parse a scenario file. Syntax errors keep serde_json's line/column info;
/// structural errors carry field paths.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config = parse_scenario_unvalidated(text)?;
    config.validate()?;
    Ok(config)
}

/// Parse without structural validation, for callers that apply overrides
/// (flags, environment) before validating.
pub fn parse_scenario_unvalidated(text: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| err("<document>", e.to_string()))
}
