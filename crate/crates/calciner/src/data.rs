//! Loader for the species property data file.
//!
//! The schema is documented at the top of `data/species.toml`, which is also
//! embedded in the binary as the default data set. A config may point at an
//! alternative file with the same schema; it must define the same five model
//! species in state-vector order.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::thermo::{
    BlendComponent, CpModel, Phase, PolynomialCp, ShomateCurve, ShomatePiece, SpeciesThermo,
    ThermoError, VolumeModel,
};
use crate::transport::SutherlandParams;

/// Model species names in state-vector order.
pub const MODEL_SPECIES: [&str; 5] = ["kaolinite", "metakaolin", "water_vapor", "air", "quartz"];

/// Phases expected for the model species, in the same order.
pub const MODEL_PHASES: [Phase; 5] = [
    Phase::Solid,
    Phase::Solid,
    Phase::Gas,
    Phase::Gas,
    Phase::Solid,
];

/// The data set compiled into the binary.
pub const EMBEDDED_SPECIES_DATA: &str = include_str!("../data/species.toml");

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("species data parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("species data uses schema version {0}, this build supports {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("species {species}: {reason}")]
    Species { species: String, reason: String },
    #[error("species {species} references unknown component {component}")]
    UnknownComponent { species: String, component: String },
    #[error("species data must define [{expected}] in order, found [{found}]")]
    WrongSpeciesSet { expected: String, found: String },
    #[error("species {species}: {source}")]
    Thermo {
        species: String,
        source: ThermoError,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesFile {
    schema_version: u32,
    species: Vec<SpeciesEntry>,
    #[serde(default)]
    components: BTreeMap<String, ComponentEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesEntry {
    name: String,
    phase: String,
    molar_mass_kg_per_mol: f64,
    formation_enthalpy_j_per_mol: f64,
    heat_capacity_polynomial: Option<PolynomialEntry>,
    heat_capacity_shomate: Option<Vec<ShomateEntry>>,
    molar_volume: Option<VolumeEntry>,
    blend: Option<Vec<BlendEntry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialEntry {
    coefficients: [f64; 6],
    t_min_k: f64,
    t_max_k: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShomateEntry {
    t_min_k: f64,
    t_max_k: f64,
    coefficients: [f64; 5],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeEntry {
    v1_m3_per_mol: f64,
    v2_m3_per_mol_k: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlendEntry {
    component: String,
    mole_fraction: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentEntry {
    molar_mass_kg_per_mol: f64,
    viscosity_reference_pa_s: f64,
    viscosity_reference_t_k: f64,
    sutherland_constant_k: f64,
    heat_capacity_shomate: Vec<ShomateEntry>,
}

/// One pure-gas constituent of a model gas species, used by the Wilke
/// viscosity rule. A single-component gas is a blend with fraction 1.
#[derive(Debug, Clone)]
pub struct GasComponent {
    pub name: String,
    /// Index of the model species this component belongs to.
    pub parent_species: usize,
    /// Mole fraction within the parent species.
    pub mole_fraction: f64,
    /// kg/mol.
    pub molar_mass: f64,
    pub sutherland: SutherlandParams,
}

/// Parsed and validated species data.
#[derive(Debug, Clone)]
pub struct SpeciesSet {
    /// Model species in state-vector order.
    pub table: Vec<SpeciesThermo>,
    /// Pure-gas constituents of all gas species, in species order.
    pub gas_components: Vec<GasComponent>,
}

fn species_err(name: &str, reason: impl Into<String>) -> DataError {
    DataError::Species {
        species: name.to_string(),
        reason: reason.into(),
    }
}

fn build_curve(name: &str, entries: &[ShomateEntry]) -> Result<ShomateCurve, DataError> {
    let pieces = entries
        .iter()
        .map(|e| ShomatePiece {
            t_min: e.t_min_k,
            t_max: e.t_max_k,
            coefficients: e.coefficients,
        })
        .collect();
    ShomateCurve::new(pieces).map_err(|source| DataError::Thermo {
        species: name.to_string(),
        source,
    })
}

/// Parses a species data file without requiring the model species set;
/// `load_model_set` adds that check on top.
pub fn parse_species_data(text: &str) -> Result<SpeciesSet, DataError> {
    let file: SpeciesFile = toml::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(DataError::SchemaVersion(file.schema_version));
    }

    let mut components: BTreeMap<String, (f64, SutherlandParams, ShomateCurve)> = BTreeMap::new();
    for (name, entry) in &file.components {
        if !(entry.molar_mass_kg_per_mol > 0.0) {
            return Err(species_err(name, "component molar mass must be positive"));
        }
        if !(entry.viscosity_reference_pa_s > 0.0
            && entry.viscosity_reference_t_k > 0.0
            && entry.sutherland_constant_k > 0.0)
        {
            return Err(species_err(name, "Sutherland parameters must be positive"));
        }
        let curve = build_curve(name, &entry.heat_capacity_shomate)?;
        components.insert(
            name.clone(),
            (
                entry.molar_mass_kg_per_mol,
                SutherlandParams {
                    reference_viscosity: entry.viscosity_reference_pa_s,
                    reference_temperature: entry.viscosity_reference_t_k,
                    sutherland_constant: entry.sutherland_constant_k,
                },
                curve,
            ),
        );
    }

    let mut table = Vec::with_capacity(file.species.len());
    let mut gas_components = Vec::new();
    let mut seen = Vec::new();
    for (index, entry) in file.species.iter().enumerate() {
        let name = entry.name.as_str();
        if seen.contains(&name) {
            return Err(species_err(name, "duplicate species entry"));
        }
        seen.push(name);
        let phase = match entry.phase.as_str() {
            "solid" => Phase::Solid,
            "gas" => Phase::Gas,
            other => {
                return Err(species_err(
                    name,
                    format!("phase must be \"solid\" or \"gas\", got \"{other}\""),
                ))
            }
        };
        if !(entry.molar_mass_kg_per_mol > 0.0) {
            return Err(species_err(name, "molar mass must be positive"));
        }
        if !entry.formation_enthalpy_j_per_mol.is_finite() {
            return Err(species_err(name, "formation enthalpy must be finite"));
        }

        let sources = entry.heat_capacity_polynomial.is_some() as u8
            + entry.heat_capacity_shomate.is_some() as u8
            + entry.blend.is_some() as u8;
        if sources != 1 {
            return Err(species_err(
                name,
                "exactly one of heat_capacity_polynomial, heat_capacity_shomate or blend \
                 must be given",
            ));
        }

        let cp = if let Some(poly) = &entry.heat_capacity_polynomial {
            CpModel::Polynomial(
                PolynomialCp::new(poly.coefficients, poly.t_min_k, poly.t_max_k).map_err(
                    |source| DataError::Thermo {
                        species: name.to_string(),
                        source,
                    },
                )?,
            )
        } else if let Some(entries) = &entry.heat_capacity_shomate {
            CpModel::Shomate(build_curve(name, entries)?)
        } else {
            let blend = entry.blend.as_ref().expect("checked above");
            if phase != Phase::Gas {
                return Err(species_err(name, "only gas species can be blends"));
            }
            if blend.is_empty() {
                return Err(species_err(name, "blend must list at least one component"));
            }
            let fraction_sum: f64 = blend.iter().map(|b| b.mole_fraction).sum();
            if (fraction_sum - 1.0).abs() > 1e-9 {
                return Err(species_err(
                    name,
                    format!("blend mole fractions sum to {fraction_sum}, expected 1"),
                ));
            }
            let mut parts = Vec::with_capacity(blend.len());
            for b in blend {
                if !(b.mole_fraction > 0.0) {
                    return Err(species_err(name, "blend mole fractions must be positive"));
                }
                let (molar_mass, sutherland, curve) =
                    components.get(&b.component).ok_or_else(|| {
                        DataError::UnknownComponent {
                            species: name.to_string(),
                            component: b.component.clone(),
                        }
                    })?;
                parts.push(BlendComponent {
                    mole_fraction: b.mole_fraction,
                    curve: curve.clone(),
                });
                gas_components.push(GasComponent {
                    name: b.component.clone(),
                    parent_species: index,
                    mole_fraction: b.mole_fraction,
                    molar_mass: *molar_mass,
                    sutherland: sutherland.clone(),
                });
            }
            CpModel::Blend(parts)
        };

        let volume = match (phase, &entry.molar_volume) {
            (Phase::Solid, Some(v)) => VolumeModel::Linear {
                v1: v.v1_m3_per_mol,
                v2: v.v2_m3_per_mol_k,
            },
            (Phase::Solid, None) => {
                return Err(species_err(name, "solid species need a molar_volume entry"))
            }
            (Phase::Gas, None) => VolumeModel::IdealGas,
            (Phase::Gas, Some(_)) => {
                return Err(species_err(
                    name,
                    "gas species use the ideal-gas volume and must not set molar_volume",
                ))
            }
        };

        if phase == Phase::Gas && entry.blend.is_none() {
            return Err(species_err(
                name,
                "gas species must be blends so their viscosity components are known",
            ));
        }

        table.push(SpeciesThermo {
            name: entry.name.clone(),
            phase,
            molar_mass: entry.molar_mass_kg_per_mol,
            formation_enthalpy: entry.formation_enthalpy_j_per_mol,
            cp,
            volume,
        });
    }

    Ok(SpeciesSet {
        table,
        gas_components,
    })
}

/// Parses species data and checks that it defines exactly the model species
/// in state-vector order with the expected phases.
pub fn load_model_set(text: &str) -> Result<SpeciesSet, DataError> {
    let set = parse_species_data(text)?;
    let found: Vec<&str> = set.table.iter().map(|s| s.name.as_str()).collect();
    if found != MODEL_SPECIES {
        return Err(DataError::WrongSpeciesSet {
            expected: MODEL_SPECIES.join(", "),
            found: found.join(", "),
        });
    }
    for (sp, expected) in set.table.iter().zip(MODEL_PHASES) {
        if sp.phase != expected {
            return Err(species_err(&sp.name, "unexpected phase for a model species"));
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_data_loads_and_matches_the_model_set() {
        let set = load_model_set(EMBEDDED_SPECIES_DATA).unwrap();
        assert_eq!(set.table.len(), 5);
        assert_eq!(set.table[0].molar_mass, 0.258159);
        assert_eq!(set.table[3].molar_mass, 0.0289697);
        // water and the three air constituents, in species order
        assert_eq!(set.gas_components.len(), 4);
        assert_eq!(set.gas_components[0].name, "water");
        assert_eq!(set.gas_components[0].parent_species, 2);
        assert_eq!(set.gas_components[1].name, "nitrogen");
        assert_eq!(set.gas_components[1].parent_species, 3);
        assert_eq!(set.gas_components[1].mole_fraction, 0.78);
    }

    fn patched(from: &str, to: &str) -> String {
        assert!(
            EMBEDDED_SPECIES_DATA.contains(from),
            "patch anchor {from:?} missing"
        );
        EMBEDDED_SPECIES_DATA.replacen(from, to, 1)
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = patched("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            parse_species_data(&text),
            Err(DataError::SchemaVersion(2))
        ));
    }

    #[test]
    fn blend_fractions_must_sum_to_one() {
        let text = patched(
            "{ component = \"nitrogen\", mole_fraction = 0.78 }",
            "{ component = \"nitrogen\", mole_fraction = 0.70 }",
        );
        let err = parse_species_data(&text).unwrap_err();
        assert!(matches!(err, DataError::Species { .. }), "got {err}");
    }

    #[test]
    fn unknown_blend_component_is_rejected() {
        let text = patched(
            "{ component = \"argon\", mole_fraction = 0.01 }",
            "{ component = \"xenon\", mole_fraction = 0.01 }",
        );
        assert!(matches!(
            parse_species_data(&text),
            Err(DataError::UnknownComponent { .. })
        ));
    }

    #[test]
    fn non_contiguous_shomate_pieces_are_rejected() {
        let text = patched("t_min_k = 847.0\nt_max_k = 1996.0", "t_min_k = 900.0\nt_max_k = 1996.0");
        assert!(matches!(parse_species_data(&text), Err(DataError::Thermo { .. })));
    }

    #[test]
    fn solids_require_a_molar_volume() {
        let text = patched(
            "[species.molar_volume]\nv1_m3_per_mol = 3.0e-5\nv2_m3_per_mol_k = 0.0",
            "",
        );
        let err = parse_species_data(&text).unwrap_err();
        assert!(err.to_string().contains("molar_volume"), "got {err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let text = EMBEDDED_SPECIES_DATA.replacen("schema_version = 1", "schema_version = 1\ncolour = \"blue\"", 1);
        let err = parse_species_data(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("colour"), "got {msg}");
    }

    #[test]
    fn model_set_requires_canonical_order() {
        // Swapping two entries keeps the file valid but not a model set.
        let set = parse_species_data(EMBEDDED_SPECIES_DATA).unwrap();
        assert_eq!(set.table[2].name, "water_vapor");
        let swapped = EMBEDDED_SPECIES_DATA.replacen("name = \"kaolinite\"", "name = \"kaolinite_x\"", 1);
        assert!(matches!(
            load_model_set(&swapped),
            Err(DataError::WrongSpeciesSet { .. })
        ));
    }
}
