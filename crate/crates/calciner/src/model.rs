//! Finite-volume plug-flow model of the calciner.
//!
//! The reactor is a vertical tube split into `n_cells` well-mixed cells.
//! Per cell the state is
//!
//! * differential: five species concentrations (mol/m^3) and the volumetric
//!   internal energies of the solid and gas phases (J/m^3),
//! * algebraic: solid temperature, gas temperature and pressure, tied to the
//!   differential state by the energy closures and the volume constraint
//!   `v_solid + v_gas = 1`.
//!
//! Interface velocities come from the pressure drop between neighboring
//! cells (boundary pressures at the ends) through the Darcy-Weisbach law,
//! species fluxes advect the left cell plus Fickian diffusion, and enthalpy
//! fluxes are carried at the upstream cell's temperatures. Each residual row
//! therefore depends on at most the cell itself and its two neighbors, which
//! the finite-difference Jacobian coloring exploits.

use thiserror::Error;

use crate::chemistry::{self, ArrheniusRate, ChemistryError};
use crate::data::{GasComponent, SpeciesSet};
use crate::diag::Diagnostics;
use crate::solver::{DaeSystem, EvalFailure, FdColumn, FdPartition};
use crate::thermo::{self, SpeciesThermo, ThermoError, GAS_CONSTANT};
use crate::transport::{self, TransportError};

pub const N_SPECIES: usize = 5;
/// Indices of the solid species (kaolinite, metakaolin, quartz).
pub const SOLID_SPECIES: [usize; 3] = [0, 1, 4];
/// Indices of the gas species (water vapor, air).
pub const GAS_SPECIES: [usize; 2] = [2, 3];
/// Differential variables per cell: five concentrations plus two energies.
pub const DIFFERENTIAL_PER_CELL: usize = 7;
/// Algebraic variables per cell: two temperatures plus pressure.
pub const ALGEBRAIC_PER_CELL: usize = 3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
    #[error("cell {cell}: {source}")]
    InCell {
        cell: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("inlet boundary: {source}")]
    AtInlet {
        #[source]
        source: Box<ModelError>,
    },
    #[error("gas phase is depleted (c_water + c_air = {0} mol/m^3)")]
    GasDepleted(f64),
    #[error("solid volume fraction {0} leaves no room for gas")]
    SolidFillsCell(f64),
    #[error("non-finite {block} residual in cell {cell}")]
    NonFinite { block: &'static str, cell: usize },
    #[error("state length mismatch: got {x_len}+{y_len}, expected {x_expected}+{y_expected}")]
    StateLength {
        x_len: usize,
        y_len: usize,
        x_expected: usize,
        y_expected: usize,
    },
    #[error("infeasible state: {0}")]
    Infeasible(String),
    #[error("species set mismatch: {0}")]
    SpeciesSet(String),
}

impl ModelError {
    fn in_cell(cell: usize, source: ModelError) -> ModelError {
        ModelError::InCell {
            cell,
            source: Box::new(source),
        }
    }

    fn at_inlet(source: ModelError) -> ModelError {
        ModelError::AtInlet {
            source: Box::new(source),
        }
    }
}

/// Index map for the packed state. Differential variables come first,
/// cell-major (five concentrations, then the two energies), followed by the
/// algebraic block, cell-major (solid T, gas T, pressure). Algebraic index
/// helpers return positions inside the algebraic slice; `packed_algebraic`
/// lifts them into the full vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_cells: usize,
}

impl StateLayout {
    pub fn n_differential(&self) -> usize {
        DIFFERENTIAL_PER_CELL * self.n_cells
    }

    pub fn n_algebraic(&self) -> usize {
        ALGEBRAIC_PER_CELL * self.n_cells
    }

    pub fn n_total(&self) -> usize {
        self.n_differential() + self.n_algebraic()
    }

    pub fn concentration(&self, cell: usize, species: usize) -> usize {
        debug_assert!(cell < self.n_cells && species < N_SPECIES);
        DIFFERENTIAL_PER_CELL * cell + species
    }

    pub fn solid_energy(&self, cell: usize) -> usize {
        DIFFERENTIAL_PER_CELL * cell + N_SPECIES
    }

    pub fn gas_energy(&self, cell: usize) -> usize {
        DIFFERENTIAL_PER_CELL * cell + N_SPECIES + 1
    }

    pub fn solid_temperature(&self, cell: usize) -> usize {
        debug_assert!(cell < self.n_cells);
        ALGEBRAIC_PER_CELL * cell
    }

    pub fn gas_temperature(&self, cell: usize) -> usize {
        ALGEBRAIC_PER_CELL * cell + 1
    }

    pub fn pressure(&self, cell: usize) -> usize {
        ALGEBRAIC_PER_CELL * cell + 2
    }

    pub fn packed_algebraic(&self, algebraic_index: usize) -> usize {
        self.n_differential() + algebraic_index
    }
}

/// Per-cell view of the state, for packing and reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub concentrations: [f64; N_SPECIES],
    pub solid_energy: f64,
    pub gas_energy: f64,
    pub solid_temperature: f64,
    pub gas_temperature: f64,
    pub pressure: f64,
}

pub fn pack(cells: &[CellState]) -> (Vec<f64>, Vec<f64>) {
    let layout = StateLayout {
        n_cells: cells.len(),
    };
    let mut x = vec![0.0; layout.n_differential()];
    let mut y = vec![0.0; layout.n_algebraic()];
    for (i, cell) in cells.iter().enumerate() {
        for (k, &c) in cell.concentrations.iter().enumerate() {
            x[layout.concentration(i, k)] = c;
        }
        x[layout.solid_energy(i)] = cell.solid_energy;
        x[layout.gas_energy(i)] = cell.gas_energy;
        y[layout.solid_temperature(i)] = cell.solid_temperature;
        y[layout.gas_temperature(i)] = cell.gas_temperature;
        y[layout.pressure(i)] = cell.pressure;
    }
    (x, y)
}

pub fn unpack(layout: StateLayout, x: &[f64], y: &[f64]) -> Vec<CellState> {
    let mut cells = Vec::with_capacity(layout.n_cells);
    for i in 0..layout.n_cells {
        let mut concentrations = [0.0; N_SPECIES];
        for (k, slot) in concentrations.iter_mut().enumerate() {
            *slot = x[layout.concentration(i, k)];
        }
        cells.push(CellState {
            concentrations,
            solid_energy: x[layout.solid_energy(i)],
            gas_energy: x[layout.gas_energy(i)],
            solid_temperature: y[layout.solid_temperature(i)],
            gas_temperature: y[layout.gas_temperature(i)],
            pressure: y[layout.pressure(i)],
        });
    }
    cells
}

#[derive(Debug, Clone)]
pub struct Grid {
    /// Reactor length, m.
    pub length: f64,
    /// Inner diameter, m.
    pub diameter: f64,
    pub n_cells: usize,
}

impl Grid {
    pub fn dz(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    /// Center coordinate of a zero-based cell, m.
    pub fn cell_center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dz()
    }
}

#[derive(Debug, Clone)]
pub struct Boundary {
    /// Inlet concentrations, mol/m^3.
    pub c_in: [f64; N_SPECIES],
    pub t_solid_in: f64,
    pub t_gas_in: f64,
    /// Pressure just upstream of the inlet, Pa.
    pub p_in: f64,
    /// Pressure just downstream of the outlet, Pa.
    pub p_out: f64,
}

/// Solid-gas heat exchange: J = k (3 v_s / r) (T_g - T_s) per unit volume,
/// with k the film coefficient and r the particle radius.
#[derive(Debug, Clone)]
pub struct HeatExchange {
    /// Film coefficient, W/(m^2 K).
    pub coefficient: f64,
    /// Particle radius, m.
    pub particle_radius: f64,
}

/// Spatially uniform initial condition; energies and the algebraic variables
/// follow from consistent initialization.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub concentrations: [f64; N_SPECIES],
    pub t_solid: f64,
    pub t_gas: f64,
}

/// Everything the scenario needs besides species property data.
#[derive(Debug, Clone)]
pub struct ScenarioDefinition {
    pub grid: Grid,
    pub boundary: Boundary,
    pub initial: InitialState,
    pub kinetics: ArrheniusRate,
    pub heat_exchange: HeatExchange,
    /// Per-species diffusion coefficients, m^2/s.
    pub diffusion: [f64; N_SPECIES],
    /// Volumetric heating of the solid phase from the surroundings, W/m^3.
    pub ambient_heating_solid: f64,
    /// Volumetric heating of the gas phase from the surroundings, W/m^3.
    pub ambient_heating_gas: f64,
}

/// A fully assembled scenario: definition plus species data.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub boundary: Boundary,
    pub initial: InitialState,
    pub kinetics: ArrheniusRate,
    pub heat_exchange: HeatExchange,
    pub diffusion: [f64; N_SPECIES],
    pub ambient_heating_solid: f64,
    pub ambient_heating_gas: f64,
    species: Vec<SpeciesThermo>,
    wilke: Vec<GasComponent>,
    molar_mass: [f64; N_SPECIES],
}

/// All interface and per-cell quantities from one model evaluation.
#[derive(Debug, Clone)]
pub struct ModelFields {
    /// Interface velocities, m/s; index 0 is the inlet, n_cells the outlet.
    pub interface_velocities: Vec<f64>,
    /// Interface molar fluxes per species, mol/(m^2 s).
    pub interface_mass_fluxes: Vec<[f64; N_SPECIES]>,
    /// Solid-phase enthalpy flux per interface, W/m^2.
    pub interface_solid_enthalpy_fluxes: Vec<f64>,
    /// Gas-phase enthalpy flux per interface, W/m^2.
    pub interface_gas_enthalpy_fluxes: Vec<f64>,
    /// Solid volume fraction per cell.
    pub solid_volume_fractions: Vec<f64>,
    /// Reaction rate per cell, mol/(m^3 s).
    pub reaction_rates: Vec<f64>,
    /// Solid-gas heat exchange per cell, W/m^3 (positive heats the solid).
    pub heat_exchange: Vec<f64>,
}

/// Keeps only the listed species of a per-species vector, zeroing the rest.
pub(crate) fn masked(values: &[f64; N_SPECIES], keep: &[usize]) -> [f64; N_SPECIES] {
    let mut out = [0.0; N_SPECIES];
    for &k in keep {
        out[k] = values[k];
    }
    out
}

impl Scenario {
    pub fn new(definition: ScenarioDefinition, species: SpeciesSet) -> Result<Self, ModelError> {
        if species.table.len() != N_SPECIES {
            return Err(ModelError::SpeciesSet(format!(
                "expected {N_SPECIES} species, got {}",
                species.table.len()
            )));
        }
        for comp in &species.gas_components {
            if comp.parent_species >= N_SPECIES {
                return Err(ModelError::SpeciesSet(format!(
                    "gas component {} references species index {}",
                    comp.name, comp.parent_species
                )));
            }
        }
        if definition.grid.n_cells == 0 {
            return Err(ModelError::Infeasible("grid needs at least one cell".into()));
        }
        let mut molar_mass = [0.0; N_SPECIES];
        for (slot, sp) in molar_mass.iter_mut().zip(&species.table) {
            *slot = sp.molar_mass;
        }
        Ok(Scenario {
            grid: definition.grid,
            boundary: definition.boundary,
            initial: definition.initial,
            kinetics: definition.kinetics,
            heat_exchange: definition.heat_exchange,
            diffusion: definition.diffusion,
            ambient_heating_solid: definition.ambient_heating_solid,
            ambient_heating_gas: definition.ambient_heating_gas,
            species: species.table,
            wilke: species.gas_components,
            molar_mass,
        })
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            n_cells: self.grid.n_cells,
        }
    }

    pub fn species(&self) -> &[SpeciesThermo] {
        &self.species
    }

    pub fn gas_components(&self) -> &[GasComponent] {
        &self.wilke
    }

    pub fn molar_mass(&self) -> &[f64; N_SPECIES] {
        &self.molar_mass
    }

    /// Volume fraction occupied by the solid species at `t_solid`.
    pub fn solid_volume_fraction(
        &self,
        t_solid: f64,
        c: &[f64; N_SPECIES],
    ) -> Result<f64, ModelError> {
        // Pressure is irrelevant: gas species carry zero weight here.
        Ok(thermo::weighted_volume(
            &self.species,
            t_solid,
            1.0,
            &masked(c, &SOLID_SPECIES),
        )?)
    }

    /// Viscosity of the gas mixture via Sutherland plus Wilke over the pure
    /// components of the gas species.
    pub fn gas_viscosity(&self, t_gas: f64, c: &[f64; N_SPECIES]) -> Result<f64, ModelError> {
        let c_gas = c[2] + c[3];
        if !(c_gas > 0.0) {
            return Err(ModelError::GasDepleted(c_gas));
        }
        let m = self.wilke.len();
        let mut x = Vec::with_capacity(m);
        let mut mu = Vec::with_capacity(m);
        let mut mass = Vec::with_capacity(m);
        for comp in &self.wilke {
            x.push(comp.mole_fraction * c[comp.parent_species] / c_gas);
            mu.push(transport::sutherland_viscosity(&comp.sutherland, t_gas)?);
            mass.push(comp.molar_mass);
        }
        Ok(transport::wilke_viscosity(&x, &mu, &mass)?)
    }

    /// Solid volume fraction, suspension viscosity and mass density of one
    /// cell (or of the inlet stream when given boundary values).
    fn cell_transport_state(
        &self,
        t_solid: f64,
        t_gas: f64,
        c: &[f64; N_SPECIES],
    ) -> Result<(f64, f64, f64), ModelError> {
        let vs = self.solid_volume_fraction(t_solid, c)?;
        let mu_gas = self.gas_viscosity(t_gas, c)?;
        let mu = transport::suspension_viscosity(mu_gas, vs)?;
        let rho = transport::mixture_density(c, &self.molar_mass)?;
        Ok((vs, mu, rho))
    }

    fn check_lengths(&self, x: &[f64], y: &[f64]) -> Result<(), ModelError> {
        let layout = self.layout();
        if x.len() != layout.n_differential() || y.len() != layout.n_algebraic() {
            return Err(ModelError::StateLength {
                x_len: x.len(),
                y_len: y.len(),
                x_expected: layout.n_differential(),
                y_expected: layout.n_algebraic(),
            });
        }
        Ok(())
    }

    pub(crate) fn cell_concentrations(&self, x: &[f64], cell: usize) -> [f64; N_SPECIES] {
        let layout = self.layout();
        let mut c = [0.0; N_SPECIES];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = x[layout.concentration(cell, k)];
        }
        c
    }

    /// Evaluates every interface and per-cell quantity of the model at the
    /// given state.
    pub fn evaluate_fields(
        &self,
        x: &[f64],
        y: &[f64],
        diag: &Diagnostics,
    ) -> Result<ModelFields, ModelError> {
        self.check_lengths(x, y)?;
        let layout = self.layout();
        let n = self.grid.n_cells;
        let dz = self.grid.dz();

        let cells: Vec<[f64; N_SPECIES]> =
            (0..n).map(|i| self.cell_concentrations(x, i)).collect();

        let mut vs = vec![0.0; n];
        let mut mu = vec![0.0; n];
        let mut rho = vec![0.0; n];
        for i in 0..n {
            let t_s = y[layout.solid_temperature(i)];
            let t_g = y[layout.gas_temperature(i)];
            let (v, m, r) = self
                .cell_transport_state(t_s, t_g, &cells[i])
                .map_err(|e| ModelError::in_cell(i, e))?;
            vs[i] = v;
            mu[i] = m;
            rho[i] = r;
        }

        // Interface velocities from pressure drops; transport properties are
        // taken from the cell upstream of the interface (boundary data at the
        // inlet).
        let b = &self.boundary;
        let mut velocities = vec![0.0; n + 1];
        let (_, mu_in, rho_in) = self
            .cell_transport_state(b.t_solid_in, b.t_gas_in, &b.c_in)
            .map_err(ModelError::at_inlet)?;
        velocities[0] = transport::darcy_weisbach_velocity(
            b.p_in - y[layout.pressure(0)],
            dz,
            self.grid.diameter,
            mu_in,
            rho_in,
        )
        .map_err(|e| ModelError::at_inlet(e.into()))?;
        for k in 1..n {
            velocities[k] = transport::darcy_weisbach_velocity(
                y[layout.pressure(k - 1)] - y[layout.pressure(k)],
                dz,
                self.grid.diameter,
                mu[k - 1],
                rho[k - 1],
            )
            .map_err(|e| ModelError::in_cell(k - 1, e.into()))?;
        }
        velocities[n] = transport::darcy_weisbach_velocity(
            y[layout.pressure(n - 1)] - b.p_out,
            dz,
            self.grid.diameter,
            mu[n - 1],
            rho[n - 1],
        )
        .map_err(|e| ModelError::in_cell(n - 1, e.into()))?;

        // Species fluxes: boundary interfaces advect the adjacent stream,
        // interior interfaces add diffusion.
        let mut mass_fluxes = vec![[0.0; N_SPECIES]; n + 1];
        for k in 0..N_SPECIES {
            mass_fluxes[0][k] = velocities[0] * b.c_in[k];
        }
        for iface in 1..n {
            let (left, right) = (iface - 1, iface);
            let mut out = [0.0; N_SPECIES];
            transport::species_flux(
                velocities[iface],
                &cells[left],
                &cells[right],
                &self.diffusion,
                dz,
                &mut out,
            );
            mass_fluxes[iface] = out;
        }
        for k in 0..N_SPECIES {
            mass_fluxes[n][k] = velocities[n] * cells[n - 1][k];
        }

        // Enthalpy fluxes at the upstream temperatures.
        let mut solid_h_fluxes = vec![0.0; n + 1];
        let mut gas_h_fluxes = vec![0.0; n + 1];
        solid_h_fluxes[0] = thermo::weighted_enthalpy(
            &self.species,
            b.t_solid_in,
            &masked(&mass_fluxes[0], &SOLID_SPECIES),
            diag,
        )
        .map_err(|e| ModelError::at_inlet(e.into()))?;
        gas_h_fluxes[0] = thermo::weighted_enthalpy(
            &self.species,
            b.t_gas_in,
            &masked(&mass_fluxes[0], &GAS_SPECIES),
            diag,
        )
        .map_err(|e| ModelError::at_inlet(e.into()))?;
        for iface in 1..=n {
            let up = iface - 1;
            let t_s = y[layout.solid_temperature(up)];
            let t_g = y[layout.gas_temperature(up)];
            solid_h_fluxes[iface] = thermo::weighted_enthalpy(
                &self.species,
                t_s,
                &masked(&mass_fluxes[iface], &SOLID_SPECIES),
                diag,
            )
            .map_err(|e| ModelError::in_cell(up, e.into()))?;
            gas_h_fluxes[iface] = thermo::weighted_enthalpy(
                &self.species,
                t_g,
                &masked(&mass_fluxes[iface], &GAS_SPECIES),
                diag,
            )
            .map_err(|e| ModelError::in_cell(up, e.into()))?;
        }

        let mut reaction_rates = vec![0.0; n];
        let mut heat_exchange = vec![0.0; n];
        for i in 0..n {
            let t_s = y[layout.solid_temperature(i)];
            let t_g = y[layout.gas_temperature(i)];
            reaction_rates[i] = self
                .kinetics
                .rate(cells[i][0], t_s)
                .map_err(|e| ModelError::in_cell(i, e.into()))?;
            heat_exchange[i] = self.heat_exchange.coefficient
                * (3.0 * vs[i] / self.heat_exchange.particle_radius)
                * (t_g - t_s);
        }

        Ok(ModelFields {
            interface_velocities: velocities,
            interface_mass_fluxes: mass_fluxes,
            interface_solid_enthalpy_fluxes: solid_h_fluxes,
            interface_gas_enthalpy_fluxes: gas_h_fluxes,
            solid_volume_fractions: vs,
            reaction_rates,
            heat_exchange,
        })
    }

    /// Assembles the split DAE residual: `f` receives the time derivatives of
    /// the differential state, `g` the algebraic residuals.
    pub fn residual(
        &self,
        x: &[f64],
        y: &[f64],
        f: &mut [f64],
        g: &mut [f64],
        diag: &Diagnostics,
    ) -> Result<(), ModelError> {
        let fields = self.evaluate_fields(x, y, diag)?;
        self.residual_from_fields(x, y, &fields, f, g, diag)
    }

    /// Same as [`Scenario::residual`] but reuses an existing field
    /// evaluation.
    pub fn residual_from_fields(
        &self,
        x: &[f64],
        y: &[f64],
        fields: &ModelFields,
        f: &mut [f64],
        g: &mut [f64],
        diag: &Diagnostics,
    ) -> Result<(), ModelError> {
        self.check_lengths(x, y)?;
        let layout = self.layout();
        let n = self.grid.n_cells;
        let dz = self.grid.dz();
        assert_eq!(f.len(), layout.n_differential());
        assert_eq!(g.len(), layout.n_algebraic());

        for i in 0..n {
            let c = self.cell_concentrations(x, i);
            let t_s = y[layout.solid_temperature(i)];
            let t_g = y[layout.gas_temperature(i)];
            let p = y[layout.pressure(i)];

            let production = chemistry::production_rates(fields.reaction_rates[i]);
            for k in 0..N_SPECIES {
                f[layout.concentration(i, k)] = -(fields.interface_mass_fluxes[i + 1][k]
                    - fields.interface_mass_fluxes[i][k])
                    / dz
                    + production[k];
            }
            f[layout.solid_energy(i)] = -(fields.interface_solid_enthalpy_fluxes[i + 1]
                - fields.interface_solid_enthalpy_fluxes[i])
                / dz
                + fields.heat_exchange[i]
                + self.ambient_heating_solid;
            f[layout.gas_energy(i)] = -(fields.interface_gas_enthalpy_fluxes[i + 1]
                - fields.interface_gas_enthalpy_fluxes[i])
                / dz
                - fields.heat_exchange[i]
                + self.ambient_heating_gas;

            let vs = fields.solid_volume_fractions[i];
            let h_solid =
                thermo::weighted_enthalpy(&self.species, t_s, &masked(&c, &SOLID_SPECIES), diag)
                    .map_err(|e| ModelError::in_cell(i, e.into()))?;
            g[layout.solid_temperature(i)] = (h_solid - p * vs) - x[layout.solid_energy(i)];

            let h_gas =
                thermo::weighted_enthalpy(&self.species, t_g, &masked(&c, &GAS_SPECIES), diag)
                    .map_err(|e| ModelError::in_cell(i, e.into()))?;
            let v_gas = thermo::weighted_volume(&self.species, t_g, p, &masked(&c, &GAS_SPECIES))
                .map_err(|e| ModelError::in_cell(i, e.into()))?;
            g[layout.gas_temperature(i)] = (h_gas - p * v_gas) - x[layout.gas_energy(i)];

            g[layout.pressure(i)] = vs + (c[2] + c[3]) * GAS_CONSTANT * t_g / p - 1.0;
        }

        for i in 0..n {
            for k in 0..N_SPECIES {
                if !f[layout.concentration(i, k)].is_finite() {
                    return Err(ModelError::NonFinite {
                        block: "species balance",
                        cell: i,
                    });
                }
            }
            if !f[layout.solid_energy(i)].is_finite() {
                return Err(ModelError::NonFinite {
                    block: "solid energy balance",
                    cell: i,
                });
            }
            if !f[layout.gas_energy(i)].is_finite() {
                return Err(ModelError::NonFinite {
                    block: "gas energy balance",
                    cell: i,
                });
            }
            if !g[layout.solid_temperature(i)].is_finite() {
                return Err(ModelError::NonFinite {
                    block: "solid energy closure",
                    cell: i,
                });
            }
            if !g[layout.gas_temperature(i)].is_finite() {
                return Err(ModelError::NonFinite {
                    block: "gas energy closure",
                    cell: i,
                });
            }
            if !g[layout.pressure(i)].is_finite() {
                return Err(ModelError::NonFinite {
                    block: "volume closure",
                    cell: i,
                });
            }
        }
        Ok(())
    }

    /// Scans a converged state for modeling-assumption violations: backflow,
    /// compressible velocities and heat-capacity range clamps.
    pub fn collect_warnings(&self, x: &[f64], y: &[f64], diag: &Diagnostics) {
        let scratch = Diagnostics::muted();
        let Ok(fields) = self.evaluate_fields(x, y, &scratch) else {
            return;
        };
        let layout = self.layout();
        for (k, &v) in fields.interface_velocities.iter().enumerate() {
            if v < 0.0 {
                diag.record_negative_velocity(v, k);
            }
            let t_up = if k == 0 {
                self.boundary.t_gas_in
            } else {
                y[layout.gas_temperature(k - 1)]
            };
            transport::check_mach(v, t_up, k, diag);
        }
        for i in 0..self.grid.n_cells {
            let t_s = y[layout.solid_temperature(i)];
            let t_g = y[layout.gas_temperature(i)];
            for &k in &SOLID_SPECIES {
                if self.species[k].cp.evaluate(t_s).out_of_range {
                    diag.record_heat_capacity_clamp(&self.species[k].name, t_s);
                }
            }
            for &k in &GAS_SPECIES {
                if self.species[k].cp.evaluate(t_g).out_of_range {
                    diag.record_heat_capacity_clamp(&self.species[k].name, t_g);
                }
            }
        }
    }
}

/// Jacobian coloring for the three-cell residual stencil: columns of cells
/// that are at least three apart touch disjoint residual rows, so ten
/// variable slots times three cell residue classes give at most thirty
/// groups regardless of grid size.
pub fn build_fd_partition(layout: StateLayout) -> FdPartition {
    let n = layout.n_cells;
    let mut groups = Vec::new();
    for residue in 0..n.min(3) {
        for slot in 0..(DIFFERENTIAL_PER_CELL + ALGEBRAIC_PER_CELL) {
            let mut group = Vec::new();
            let mut cell = residue;
            while cell < n {
                let column = match slot {
                    0..=4 => layout.concentration(cell, slot),
                    5 => layout.solid_energy(cell),
                    6 => layout.gas_energy(cell),
                    7 => layout.packed_algebraic(layout.solid_temperature(cell)),
                    8 => layout.packed_algebraic(layout.gas_temperature(cell)),
                    _ => layout.packed_algebraic(layout.pressure(cell)),
                };
                let lo = cell.saturating_sub(1);
                let hi = (cell + 1).min(n - 1);
                let mut rows =
                    Vec::with_capacity((hi - lo + 1) * (DIFFERENTIAL_PER_CELL + ALGEBRAIC_PER_CELL));
                for neighbor in lo..=hi {
                    for k in 0..DIFFERENTIAL_PER_CELL {
                        rows.push(DIFFERENTIAL_PER_CELL * neighbor + k);
                    }
                    for k in 0..ALGEBRAIC_PER_CELL {
                        rows.push(layout.packed_algebraic(ALGEBRAIC_PER_CELL * neighbor + k));
                    }
                }
                group.push(FdColumn { column, rows });
                cell += 3;
            }
            if !group.is_empty() {
                groups.push(group);
            }
        }
    }
    groups
}

/// The scenario wrapped as a DAE system for the solver.
#[derive(Debug)]
pub struct CalcinerSystem {
    scenario: Scenario,
    layout: StateLayout,
    partition: FdPartition,
}

impl CalcinerSystem {
    pub fn new(scenario: Scenario) -> Self {
        let layout = scenario.layout();
        let partition = build_fd_partition(layout);
        Self {
            scenario,
            layout,
            partition,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }
}

impl DaeSystem for CalcinerSystem {
    fn n_differential(&self) -> usize {
        self.layout.n_differential()
    }

    fn n_algebraic(&self) -> usize {
        self.layout.n_algebraic()
    }

    fn eval(
        &self,
        _t: f64,
        x: &[f64],
        y: &[f64],
        f: &mut [f64],
        g: &mut [f64],
        diag: &Diagnostics,
    ) -> Result<(), EvalFailure> {
        self.scenario
            .residual(x, y, f, g, diag)
            .map_err(|e| EvalFailure {
                context: e.to_string(),
            })
    }

    fn fd_partition(&self) -> FdPartition {
        self.partition.clone()
    }

    fn fd_floor(&self, index: usize) -> f64 {
        let nd = self.layout.n_differential();
        if index < nd {
            match index % DIFFERENTIAL_PER_CELL {
                0..=4 => 1e-2, // concentrations, mol/m^3
                _ => 1e3,      // energies, J/m^3
            }
        } else {
            match (index - nd) % ALGEBRAIC_PER_CELL {
                0 | 1 => 1.0, // temperatures, K
                _ => 1e2,     // pressure, Pa
            }
        }
    }

    fn algebraic_residual_scales(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        for cell in 0..self.layout.n_cells {
            let us = x[self.layout.solid_energy(cell)].abs().max(1e3);
            let ug = x[self.layout.gas_energy(cell)].abs().max(1e3);
            out[self.layout.solid_temperature(cell)] = us;
            out[self.layout.gas_temperature(cell)] = ug;
            out[self.layout.pressure(cell)] = 1.0;
        }
    }

    fn refine_algebraic(
        &self,
        _t: f64,
        x: &[f64],
        y: &mut [f64],
        _diag: &Diagnostics,
    ) -> Result<(), EvalFailure> {
        crate::solver::init::refine_cells(&self.scenario, x, y).map_err(|e| EvalFailure {
            context: e.to_string(),
        })
    }

    fn collect_warnings(&self, _t: f64, x: &[f64], y: &[f64], diag: &Diagnostics) {
        self.scenario.collect_warnings(x, y, diag);
    }
}
