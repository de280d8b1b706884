//! Calcination kinetics: kaolinite decomposes into metakaolin and water
//! vapor, kaolinite -> metakaolin + 2 H2O, with an Arrhenius rate that is
//! cubic in the kaolinite concentration. Quartz and air are inert.

use thiserror::Error;

use crate::diag::Diagnostics;
use crate::thermo::{self, SpeciesThermo, ThermoError, GAS_CONSTANT};

/// Signed stoichiometry of the calcination reaction over the model species
/// [kaolinite, metakaolin, water_vapor, air, quartz].
pub const STOICHIOMETRY: [f64; 5] = [-1.0, 1.0, 2.0, 0.0, 0.0];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChemistryError {
    #[error("temperature {0} K must be finite and positive")]
    InvalidTemperature(f64),
}

/// Arrhenius kinetics with a cubic concentration dependence.
#[derive(Debug, Clone)]
pub struct ArrheniusRate {
    /// Pre-exponential factor, (mol/m^3)^(1-3) / s for the cubic law.
    pub pre_exponential: f64,
    /// Activation energy, J/mol.
    pub activation_energy: f64,
}

impl ArrheniusRate {
    /// k(T) = k0 exp(-Ea / (R T)).
    pub fn rate_constant(&self, t: f64) -> Result<f64, ChemistryError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(ChemistryError::InvalidTemperature(t));
        }
        Ok(self.pre_exponential * (-self.activation_energy / (GAS_CONSTANT * t)).exp())
    }

    /// r = k(T_solid) max(c, 0)^3, mol/(m^3 s). Slightly negative
    /// concentrations from transients contribute zero rate.
    pub fn rate(&self, c_kaolinite: f64, t_solid: f64) -> Result<f64, ChemistryError> {
        let c = c_kaolinite.max(0.0);
        Ok(self.rate_constant(t_solid)? * c.powi(3))
    }
}

/// Species production rates nu_j r for a scalar reaction rate, mol/(m^3 s).
pub fn production_rates(rate: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (slot, nu) in out.iter_mut().zip(STOICHIOMETRY) {
        *slot = nu * rate;
    }
    out
}

/// Reaction enthalpy sum(nu_j h_j(T)), J per mole of kaolinite converted.
/// Positive: calcination is endothermic.
pub fn reaction_enthalpy(
    table: &[SpeciesThermo],
    t: f64,
    diag: &Diagnostics,
) -> Result<f64, ThermoError> {
    thermo::weighted_enthalpy(table, t, &STOICHIOMETRY, diag)
}
