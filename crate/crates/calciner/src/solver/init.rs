//! Consistent initialization and per-cell polishing of the algebraic state.
//!
//! The scenario prescribes uniform concentrations and temperatures. A
//! consistent starting point follows in closed form: the volume constraint
//! fixes the pressure, and the internal energies are evaluated with exactly
//! the expressions the residual uses, so the algebraic rows start at machine
//! zero.
//!
//! The same cell-local structure polishes any accepted state. The gas
//! internal energy `h_g(T) - c_gas R T` does not depend on pressure, so the
//! gas temperature solves a scalar equation on its own; the solid
//! temperature then solves a scalar equation with the pressure eliminated
//! through the volume constraint; the pressure follows explicitly.

use crate::diag::Diagnostics;
use crate::model::{masked, ModelError, Scenario, GAS_SPECIES, SOLID_SPECIES};
use crate::thermo::{self, GAS_CONSTANT};

/// Target magnitude for the polished scalar closures, J/m^3.
const REFINE_TOLERANCE: f64 = 1e-9;
const MAX_REFINE_ITERATIONS: usize = 12;
/// Temperatures outside this band abort a scalar solve (the best iterate so
/// far is kept).
const T_LOW: f64 = 50.0;
const T_HIGH: f64 = 6000.0;

/// Builds the uniform consistent initial state of a scenario.
pub fn consistent_init(scenario: &Scenario) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let layout = scenario.layout();
    let diag = Diagnostics::muted();
    let c = scenario.initial.concentrations;
    let t_s = scenario.initial.t_solid;
    let t_g = scenario.initial.t_gas;

    let vs = scenario.solid_volume_fraction(t_s, &c)?;
    if !(vs < 1.0) {
        return Err(ModelError::SolidFillsCell(vs));
    }
    let c_gas = c[2] + c[3];
    if !(c_gas > 0.0) {
        return Err(ModelError::GasDepleted(c_gas));
    }
    let p = c_gas * GAS_CONSTANT * t_g / (1.0 - vs);

    let species = scenario.species();
    let h_solid = thermo::weighted_enthalpy(species, t_s, &masked(&c, &SOLID_SPECIES), &diag)?;
    let u_s = h_solid - p * vs;
    let h_gas = thermo::weighted_enthalpy(species, t_g, &masked(&c, &GAS_SPECIES), &diag)?;
    let v_gas = thermo::weighted_volume(species, t_g, p, &masked(&c, &GAS_SPECIES))?;
    let u_g = h_gas - p * v_gas;

    let mut x = vec![0.0; layout.n_differential()];
    let mut y = vec![0.0; layout.n_algebraic()];
    for i in 0..layout.n_cells {
        for (k, &ck) in c.iter().enumerate() {
            x[layout.concentration(i, k)] = ck;
        }
        x[layout.solid_energy(i)] = u_s;
        x[layout.gas_energy(i)] = u_g;
        y[layout.solid_temperature(i)] = t_s;
        y[layout.gas_temperature(i)] = t_g;
        y[layout.pressure(i)] = p;
    }
    refine_cells(scenario, &x, &mut y)?;
    Ok((x, y))
}

/// Polishes the algebraic state cell by cell so the closures match the
/// differential state down to arithmetic noise. Keeps the best iterate seen,
/// so the state never gets worse.
pub fn refine_cells(scenario: &Scenario, x: &[f64], y: &mut [f64]) -> Result<(), ModelError> {
    let layout = scenario.layout();
    let species = scenario.species();
    let diag = Diagnostics::muted();

    for i in 0..layout.n_cells {
        let c = scenario.cell_concentrations(x, i);
        let c_gas = c[2] + c[3];
        if !(c_gas > 0.0) {
            return Err(ModelError::InCell {
                cell: i,
                source: Box::new(ModelError::GasDepleted(c_gas)),
            });
        }
        let u_s_target = x[layout.solid_energy(i)];
        let u_g_target = x[layout.gas_energy(i)];
        let c_gas_r = c_gas * GAS_CONSTANT;
        let gas_weights = masked(&c, &GAS_SPECIES);
        let solid_weights = masked(&c, &SOLID_SPECIES);

        // Gas temperature: u_g(T) = h_g(T) - c_gas R T, pressure drops out.
        let mut t = y[layout.gas_temperature(i)];
        let mut best_t = t;
        let mut best_q = f64::INFINITY;
        for _ in 0..MAX_REFINE_ITERATIONS {
            let q = thermo::weighted_enthalpy(species, t, &gas_weights, &diag)
                .map_err(|e| in_cell(i, e.into()))?
                - c_gas_r * t
                - u_g_target;
            if q.abs() < best_q {
                best_q = q.abs();
                best_t = t;
            }
            if q.abs() <= REFINE_TOLERANCE {
                break;
            }
            let slope = thermo::weighted_heat_capacity(species, t, &gas_weights, &diag)
                .map_err(|e| in_cell(i, e.into()))?
                - c_gas_r;
            if !slope.is_finite() || slope.abs() < 1e-30 {
                break;
            }
            let next = t - q / slope;
            if !next.is_finite() || !(T_LOW..T_HIGH).contains(&next) {
                break;
            }
            t = next;
        }
        let t_g = best_t;

        // Solid temperature: eliminate the pressure through the volume
        // constraint, then solve u_s(T) = h_s(T) - P(T) v_s(T) for T.
        let solid_energy = |t: f64| -> Result<f64, ModelError> {
            let vs = scenario.solid_volume_fraction(t, &c)?;
            if !(vs < 1.0) {
                return Err(ModelError::SolidFillsCell(vs));
            }
            let p = c_gas_r * t_g / (1.0 - vs);
            let h = thermo::weighted_enthalpy(species, t, &solid_weights, &diag)?;
            Ok(h - p * vs)
        };
        let mut t = y[layout.solid_temperature(i)];
        let mut best_t = t;
        let mut best_q = f64::INFINITY;
        for _ in 0..MAX_REFINE_ITERATIONS {
            let q = solid_energy(t).map_err(|e| in_cell(i, e))? - u_s_target;
            if q.abs() < best_q {
                best_q = q.abs();
                best_t = t;
            }
            if q.abs() <= REFINE_TOLERANCE {
                break;
            }
            let dt = 1e-7 * t.abs().max(300.0);
            let q_hi = solid_energy(t + dt).map_err(|e| in_cell(i, e))? - u_s_target;
            let q_lo = solid_energy(t - dt).map_err(|e| in_cell(i, e))? - u_s_target;
            let slope = (q_hi - q_lo) / (2.0 * dt);
            if !slope.is_finite() || slope.abs() < 1e-30 {
                break;
            }
            let next = t - q / slope;
            if !next.is_finite() || !(T_LOW..T_HIGH).contains(&next) {
                break;
            }
            t = next;
        }
        let t_s = best_t;

        let vs = scenario
            .solid_volume_fraction(t_s, &c)
            .map_err(|e| in_cell(i, e))?;
        if !(vs < 1.0) {
            return Err(in_cell(i, ModelError::SolidFillsCell(vs)));
        }
        y[layout.solid_temperature(i)] = t_s;
        y[layout.gas_temperature(i)] = t_g;
        y[layout.pressure(i)] = c_gas_r * t_g / (1.0 - vs);
    }
    Ok(())
}

fn in_cell(cell: usize, source: ModelError) -> ModelError {
    ModelError::InCell {
        cell,
        source: Box::new(source),
    }
}
