//! Scenario configuration: the on-disk TOML schema, built-in defaults,
//! command-line overrides, and the translation into a model [`Scenario`]
//! plus solver settings.
//!
//! Loading tracks which fields came from built-in defaults rather than the
//! file or an override, so run reports can show exactly what was assumed.
//! Geometry and heat-transfer parameters have no measured basis at all;
//! those are additionally singled out as assumed defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemistry::ArrheniusRate;
use crate::data::{self, SpeciesSet};
use crate::model::{
    Boundary, Grid, HeatExchange, InitialState, ModelError, Scenario, ScenarioDefinition,
    N_SPECIES,
};
use crate::solver::SolverConfig;

/// Pressure drop across the reactor assumed when the inlet pressure is not
/// given, Pa.
const DEFAULT_PRESSURE_DROP: f64 = 600.0;

/// Fields whose built-in values are engineering assumptions rather than
/// measurements; the run report lists them whenever they are left unset.
const ASSUMED_DEFAULT_FIELDS: [&str; 4] = [
    "geometry.length_m",
    "geometry.diameter_m",
    "heat_transfer.exchange_coefficient_w_per_m2_k",
    "heat_transfer.particle_radius_m",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("override {key:?}: {reason}")]
    Override { key: String, reason: String },
    #[error("config field {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Species(#[from] data::DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub grid: GridSection,
    pub boundary: BoundarySection,
    pub initial: InitialSection,
    #[serde(default)]
    pub kinetics: KineticsSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub heat_transfer: HeatTransferSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub species: SpeciesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// Reactor length, m.
    #[serde(default = "default_length")]
    pub length_m: f64,
    /// Inner diameter, m.
    #[serde(default = "default_diameter")]
    pub diameter_m: f64,
}

fn default_length() -> f64 {
    100.0
}

fn default_diameter() -> f64 {
    1.0
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            length_m: default_length(),
            diameter_m: default_diameter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Number of axial finite-volume cells.
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_cells() -> usize {
    20
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            cells: default_cells(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    /// Inlet concentrations in species order
    /// [kaolinite, metakaolin, water_vapor, air, quartz], mol/m^3.
    pub c_in_mol_per_m3: [f64; N_SPECIES],
    pub t_solid_in_k: f64,
    pub t_gas_in_k: f64,
    /// Pressure just downstream of the outlet, Pa.
    #[serde(default = "default_p_out")]
    pub p_out_pa: f64,
    /// Pressure just upstream of the inlet, Pa; defaults to the outlet
    /// pressure plus 600 Pa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_in_pa: Option<f64>,
    /// Volumetric heating of the solid phase from the surroundings, W/m^3.
    #[serde(default)]
    pub q_ambient_solid_w_per_m3: f64,
    /// Volumetric heating of the gas phase from the surroundings, W/m^3.
    #[serde(default)]
    pub q_ambient_gas_w_per_m3: f64,
}

fn default_p_out() -> f64 {
    101_325.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Uniform initial concentrations in species order, mol/m^3.
    pub c_mol_per_m3: [f64; N_SPECIES],
    pub t_solid_k: f64,
    pub t_gas_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsSection {
    /// Pre-exponential factor of the cubic rate law, m^6/(mol^2 s).
    #[serde(default = "default_pre_exponential")]
    pub pre_exponential_m6_per_mol2_s: f64,
    #[serde(default = "default_activation_energy")]
    pub activation_energy_j_per_mol: f64,
}

fn default_pre_exponential() -> f64 {
    2.9e15
}

fn default_activation_energy() -> f64 {
    2.02e5
}

impl Default for KineticsSection {
    fn default() -> Self {
        KineticsSection {
            pre_exponential_m6_per_mol2_s: default_pre_exponential(),
            activation_energy_j_per_mol: default_activation_energy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    /// Per-species axial dispersion coefficients, m^2/s.
    #[serde(default = "default_diffusion")]
    pub diffusion_m2_per_s: [f64; N_SPECIES],
    /// Sutherland constant overrides by gas component name, K. The
    /// constants ship with literature values and can be recalibrated here.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sutherland_constant_k: BTreeMap<String, f64>,
}

fn default_diffusion() -> [f64; N_SPECIES] {
    [0.1; N_SPECIES]
}

impl Default for TransportSection {
    fn default() -> Self {
        TransportSection {
            diffusion_m2_per_s: default_diffusion(),
            sutherland_constant_k: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatTransferSection {
    /// Solid-gas film coefficient, W/(m^2 K).
    #[serde(default = "default_exchange_coefficient")]
    pub exchange_coefficient_w_per_m2_k: f64,
    /// Particle radius setting the exchange area per volume, m.
    #[serde(default = "default_particle_radius")]
    pub particle_radius_m: f64,
}

fn default_exchange_coefficient() -> f64 {
    60.0
}

fn default_particle_radius() -> f64 {
    1.0e-5
}

impl Default for HeatTransferSection {
    fn default() -> Self {
        HeatTransferSection {
            exchange_coefficient_w_per_m2_k: default_exchange_coefficient(),
            particle_radius_m: default_particle_radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// First step size, s; chosen from the initial slope when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step_s: Option<f64>,
    #[serde(default = "default_min_step")]
    pub min_step_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_s: Option<f64>,
    /// Transient simulation horizon, s.
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    /// Relaxation integration ahead of the steady-state iteration, s.
    #[serde(default = "default_relaxation")]
    pub steady_relaxation_s: f64,
}

fn default_rtol() -> f64 {
    1e-6
}

fn default_atol() -> f64 {
    1e-8
}

fn default_min_step() -> f64 {
    1e-12
}

fn default_horizon() -> f64 {
    60.0
}

fn default_relaxation() -> f64 {
    10.0
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            rtol: default_rtol(),
            atol: default_atol(),
            initial_step_s: None,
            min_step_s: default_min_step(),
            max_step_s: None,
            horizon_s: default_horizon(),
            steady_relaxation_s: default_relaxation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Uniformly spaced samples over the horizon in the time-series table.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    200
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    /// Alternative species property data file, resolved relative to the
    /// config file; the embedded data set is used when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
}

/// A fully loaded and validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    /// The resolved configuration: every applicable default filled in.
    pub config: ScenarioConfig,
    /// Dotted paths of fields that fell back to built-in defaults.
    pub defaults_used: Vec<String>,
    /// The subset of `defaults_used` with no measured basis.
    pub assumed_defaults: Vec<String>,
    pub scenario: Scenario,
    pub solver: SolverConfig,
}

impl LoadedScenario {
    pub fn horizon(&self) -> f64 {
        self.config.solver.horizon_s
    }

    pub fn samples(&self) -> usize {
        self.config.output.samples
    }

    pub fn relaxation(&self) -> f64 {
        self.config.solver.steady_relaxation_s
    }
}

/// Loads a scenario from a file, applying `key=value` overrides on top.
pub fn load_file(path: &Path, overrides: &[String]) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_str(&text, path.parent(), overrides)
}

/// Loads a scenario from config text; `base_dir` anchors relative data-file
/// paths.
pub fn load_str(
    text: &str,
    base_dir: Option<&Path>,
    overrides: &[String],
) -> Result<LoadedScenario, ConfigError> {
    let mut table: toml::Table = toml::from_str(text)?;
    for entry in overrides {
        apply_override(&mut table, entry)?;
    }

    let mut config: ScenarioConfig = table.clone().try_into()?;
    if config.boundary.p_in_pa.is_none() {
        config.boundary.p_in_pa = Some(config.boundary.p_out_pa + DEFAULT_PRESSURE_DROP);
    }
    validate(&config)?;

    let defaults_used = defaulted_paths(&config, &table)?;
    let assumed_defaults: Vec<String> = defaults_used
        .iter()
        .filter(|p| ASSUMED_DEFAULT_FIELDS.contains(&p.as_str()))
        .cloned()
        .collect();

    let species = load_species(&config, base_dir)?;
    let scenario = build_scenario(&config, species)?;
    let solver = solver_config(&config.solver);
    Ok(LoadedScenario {
        config,
        defaults_used,
        assumed_defaults,
        scenario,
        solver,
    })
}

/// Applies one `dotted.path=value` override onto the raw config tree.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), ConfigError> {
    let err = |reason: &str| ConfigError::Override {
        key: entry.to_string(),
        reason: reason.to_string(),
    };
    let (path, raw_value) = entry.split_once('=').ok_or_else(|| {
        err("expected dotted.path=value")
    })?;
    let segments: Vec<&str> = path.trim().split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(err("path has an empty segment"));
    }

    // The value grammar is TOML's: numbers, booleans, strings, arrays. Bare
    // words fall back to strings so `--override species.data_file=alt.toml`
    // works unquoted.
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw_value.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw_value.trim().to_string()));

    let mut current = table;
    for segment in &segments[..segments.len() - 1] {
        current = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                ConfigError::Override {
                    key: entry.to_string(),
                    reason: format!("path segment {segment:?} is not a table"),
                }
            })?;
    }
    current.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn validate(config: &ScenarioConfig) -> Result<(), ConfigError> {
    let positive = |field: &str, v: f64| -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(invalid(field, format!("must be positive, got {v}")))
        }
    };
    let non_negative = |field: &str, v: f64| -> Result<(), ConfigError> {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(invalid(field, format!("must be zero or positive, got {v}")))
        }
    };
    let concentrations = |field: &str, c: &[f64; N_SPECIES]| -> Result<(), ConfigError> {
        for (i, &v) in c.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(
                    field,
                    format!("entry {i} must be zero or positive, got {v}"),
                ));
            }
        }
        Ok(())
    };

    positive("geometry.length_m", config.geometry.length_m)?;
    positive("geometry.diameter_m", config.geometry.diameter_m)?;
    if config.grid.cells == 0 {
        return Err(invalid("grid.cells", "at least one cell is required"));
    }

    let b = &config.boundary;
    concentrations("boundary.c_in_mol_per_m3", &b.c_in_mol_per_m3)?;
    positive("boundary.t_solid_in_k", b.t_solid_in_k)?;
    positive("boundary.t_gas_in_k", b.t_gas_in_k)?;
    positive("boundary.p_out_pa", b.p_out_pa)?;
    positive("boundary.p_in_pa", b.p_in_pa.expect("resolved before validation"))?;
    if !b.q_ambient_solid_w_per_m3.is_finite() {
        return Err(invalid("boundary.q_ambient_solid_w_per_m3", "must be finite"));
    }
    if !b.q_ambient_gas_w_per_m3.is_finite() {
        return Err(invalid("boundary.q_ambient_gas_w_per_m3", "must be finite"));
    }

    concentrations("initial.c_mol_per_m3", &config.initial.c_mol_per_m3)?;
    positive("initial.t_solid_k", config.initial.t_solid_k)?;
    positive("initial.t_gas_k", config.initial.t_gas_k)?;

    non_negative(
        "kinetics.pre_exponential_m6_per_mol2_s",
        config.kinetics.pre_exponential_m6_per_mol2_s,
    )?;
    non_negative(
        "kinetics.activation_energy_j_per_mol",
        config.kinetics.activation_energy_j_per_mol,
    )?;

    for (i, &d) in config.transport.diffusion_m2_per_s.iter().enumerate() {
        if !(d.is_finite() && d >= 0.0) {
            return Err(invalid(
                "transport.diffusion_m2_per_s",
                format!("entry {i} must be zero or positive, got {d}"),
            ));
        }
    }
    for (name, &k) in &config.transport.sutherland_constant_k {
        if !(k.is_finite() && k > 0.0) {
            return Err(invalid(
                &format!("transport.sutherland_constant_k.{name}"),
                format!("must be positive, got {k}"),
            ));
        }
    }

    non_negative(
        "heat_transfer.exchange_coefficient_w_per_m2_k",
        config.heat_transfer.exchange_coefficient_w_per_m2_k,
    )?;
    positive(
        "heat_transfer.particle_radius_m",
        config.heat_transfer.particle_radius_m,
    )?;

    let s = &config.solver;
    positive("solver.rtol", s.rtol)?;
    positive("solver.atol", s.atol)?;
    positive("solver.min_step_s", s.min_step_s)?;
    if let Some(h) = s.initial_step_s {
        positive("solver.initial_step_s", h)?;
    }
    if let Some(h) = s.max_step_s {
        positive("solver.max_step_s", h)?;
        if h < s.min_step_s {
            return Err(invalid(
                "solver.max_step_s",
                "must be at least solver.min_step_s",
            ));
        }
    }
    non_negative("solver.horizon_s", s.horizon_s)?;
    non_negative("solver.steady_relaxation_s", s.steady_relaxation_s)?;

    if config.output.samples == 0 {
        return Err(invalid("output.samples", "at least one sample is required"));
    }
    Ok(())
}

/// Leaf paths present in the resolved config but absent from the input tree:
/// the fields that fell back to built-in defaults.
fn defaulted_paths(
    config: &ScenarioConfig,
    input: &toml::Table,
) -> Result<Vec<String>, ConfigError> {
    let resolved = toml::Table::try_from(config).map_err(|e| ConfigError::Invalid {
        field: "<config>".into(),
        reason: format!("cannot re-serialize: {e}"),
    })?;
    let mut paths = Vec::new();
    collect_missing(&resolved, input, &mut String::new(), &mut paths);
    Ok(paths)
}

fn collect_missing(
    resolved: &toml::Table,
    input: &toml::Table,
    prefix: &mut String,
    out: &mut Vec<String>,
) {
    for (key, value) in resolved {
        let saved = prefix.len();
        if !prefix.is_empty() {
            prefix.push('.');
        }
        prefix.push_str(key);
        match (value, input.get(key)) {
            (toml::Value::Table(res_inner), Some(toml::Value::Table(in_inner))) => {
                collect_missing(res_inner, in_inner, prefix, out);
            }
            (toml::Value::Table(res_inner), None) => {
                collect_missing(res_inner, &toml::Table::new(), prefix, out);
            }
            (_, Some(_)) => {}
            (_, None) => out.push(prefix.clone()),
        }
        prefix.truncate(saved);
    }
}

fn load_species(
    config: &ScenarioConfig,
    base_dir: Option<&Path>,
) -> Result<SpeciesSet, ConfigError> {
    let mut set = match &config.species.data_file {
        None => data::load_model_set(data::EMBEDDED_SPECIES_DATA)?,
        Some(file) => {
            let path = match base_dir {
                Some(dir) if file.is_relative() => dir.join(file),
                _ => file.clone(),
            };
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path,
                source,
            })?;
            data::load_model_set(&text)?
        }
    };
    for (name, &constant) in &config.transport.sutherland_constant_k {
        let component = set
            .gas_components
            .iter_mut()
            .find(|c| &c.name == name)
            .ok_or_else(|| {
                invalid(
                    &format!("transport.sutherland_constant_k.{name}"),
                    "no gas component with this name in the species data",
                )
            })?;
        component.sutherland.sutherland_constant = constant;
    }
    Ok(set)
}

fn build_scenario(config: &ScenarioConfig, species: SpeciesSet) -> Result<Scenario, ConfigError> {
    let definition = ScenarioDefinition {
        grid: Grid {
            length: config.geometry.length_m,
            diameter: config.geometry.diameter_m,
            n_cells: config.grid.cells,
        },
        boundary: Boundary {
            c_in: config.boundary.c_in_mol_per_m3,
            t_solid_in: config.boundary.t_solid_in_k,
            t_gas_in: config.boundary.t_gas_in_k,
            p_in: config.boundary.p_in_pa.expect("resolved before build"),
            p_out: config.boundary.p_out_pa,
        },
        initial: InitialState {
            concentrations: config.initial.c_mol_per_m3,
            t_solid: config.initial.t_solid_k,
            t_gas: config.initial.t_gas_k,
        },
        kinetics: ArrheniusRate {
            pre_exponential: config.kinetics.pre_exponential_m6_per_mol2_s,
            activation_energy: config.kinetics.activation_energy_j_per_mol,
        },
        heat_exchange: HeatExchange {
            coefficient: config.heat_transfer.exchange_coefficient_w_per_m2_k,
            particle_radius: config.heat_transfer.particle_radius_m,
        },
        diffusion: config.transport.diffusion_m2_per_s,
        ambient_heating_solid: config.boundary.q_ambient_solid_w_per_m3,
        ambient_heating_gas: config.boundary.q_ambient_gas_w_per_m3,
    };
    Ok(Scenario::new(definition, species)?)
}

fn solver_config(section: &SolverSection) -> SolverConfig {
    SolverConfig {
        rtol: section.rtol,
        atol: section.atol,
        initial_step: section.initial_step_s,
        min_step: section.min_step_s,
        max_step: section.max_step_s,
        ..SolverConfig::default()
    }
}
