//! Data emission: comma-separated tables with a fixed, documented schema.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! crash mid-write never leaves a truncated table behind. Numbers use the
//! shortest representation that round-trips through a double.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{ModelError, Scenario, StateLayout, N_SPECIES};

/// Header of the transient time-series table.
pub const TIME_SERIES_HEADER: &str = "time_s,cell,z_m,c_kaolinite_mol_per_m3,\
c_metakaolin_mol_per_m3,c_water_vapor_mol_per_m3,c_air_mol_per_m3,c_quartz_mol_per_m3,\
t_solid_k,t_gas_k,p_pa";

/// Header of the steady-state profile table.
pub const STEADY_HEADER: &str = "cell,z_m,c_kaolinite_mol_per_m3,\
c_metakaolin_mol_per_m3,c_water_vapor_mol_per_m3,c_air_mol_per_m3,c_quartz_mol_per_m3,\
t_solid_k,t_gas_k,p_pa,reaction_rate_mol_per_m3_s";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Writes `content` to `path` atomically: a temporary file in the same
/// directory is renamed over the destination once fully written.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), OutputError> {
    let io_err = |source: io::Error| OutputError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Shortest decimal form that parses back to the same double; the standard
/// `Display` for `f64` guarantees the round trip.
fn shortest(value: f64) -> String {
    format!("{value}")
}

fn push_state_columns(line: &mut String, concentrations: &[f64], t_s: f64, t_g: f64, p: f64) {
    for &c in concentrations {
        let _ = write!(line, ",{}", shortest(c));
    }
    let _ = write!(line, ",{},{},{}", shortest(t_s), shortest(t_g), shortest(p));
}

/// Renders the transient time-series table: one row per (sample, cell), no
/// row for the initial state, cells numbered from 1 at the inlet.
pub fn time_series_table(
    scenario: &Scenario,
    times: &[f64],
    states: &[Vec<f64>],
) -> Result<String, OutputError> {
    let layout = scenario.layout();
    let mut out = String::new();
    out.push_str(TIME_SERIES_HEADER);
    out.push('\n');
    for (time, state) in times.iter().zip(states) {
        for cell in 0..layout.n_cells {
            let row = CellRow::read(layout, state, cell);
            let mut line = format!(
                "{},{},{}",
                shortest(*time),
                cell + 1,
                shortest(scenario.grid.cell_center(cell))
            );
            push_state_columns(&mut line, &row.concentrations, row.t_solid, row.t_gas, row.pressure);
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Renders the steady-state profile table with the reaction rate as a
/// derived column.
pub fn steady_table(scenario: &Scenario, x: &[f64], y: &[f64]) -> Result<String, OutputError> {
    let layout = scenario.layout();
    let mut state = Vec::with_capacity(x.len() + y.len());
    state.extend_from_slice(x);
    state.extend_from_slice(y);
    let mut out = String::new();
    out.push_str(STEADY_HEADER);
    out.push('\n');
    for cell in 0..layout.n_cells {
        let row = CellRow::read(layout, &state, cell);
        let rate = scenario
            .kinetics
            .rate(row.concentrations[0], row.t_solid)
            .map_err(ModelError::from)?;
        let mut line = format!(
            "{},{}",
            cell + 1,
            shortest(scenario.grid.cell_center(cell))
        );
        push_state_columns(&mut line, &row.concentrations, row.t_solid, row.t_gas, row.pressure);
        let _ = write!(line, ",{}", shortest(rate));
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

struct CellRow {
    concentrations: [f64; N_SPECIES],
    t_solid: f64,
    t_gas: f64,
    pressure: f64,
}

impl CellRow {
    /// Reads one cell out of a packed `[x; y]` state.
    fn read(layout: StateLayout, state: &[f64], cell: usize) -> CellRow {
        let mut concentrations = [0.0; N_SPECIES];
        for (species, slot) in concentrations.iter_mut().enumerate() {
            *slot = state[layout.concentration(cell, species)];
        }
        let nd = layout.n_differential();
        CellRow {
            concentrations,
            t_solid: state[nd + layout.solid_temperature(cell)],
            t_gas: state[nd + layout.gas_temperature(cell)],
            pressure: state[nd + layout.pressure(cell)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::test_scenario;
    use crate::solver::init::consistent_init;

    #[test]
    fn atomic_write_replaces_content_and_leaves_no_droppings() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        let entries: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(entries, vec![std::ffi::OsString::from("table.csv")]);
    }

    #[test]
    fn values_round_trip_through_the_shortest_form() {
        for v in [0.1, 1.0 / 3.0, 657.15, 1.0e-12, 98_521.847_743_682_81] {
            let text = shortest(v);
            assert_eq!(text.parse::<f64>().unwrap(), v, "via {text}");
        }
    }

    #[test]
    fn time_series_has_one_row_per_sample_and_cell() {
        let scenario = test_scenario(3);
        let (x, y) = consistent_init(&scenario).unwrap();
        let mut state = x.clone();
        state.extend_from_slice(&y);
        let table =
            time_series_table(&scenario, &[0.5, 1.0], &[state.clone(), state.clone()]).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], TIME_SERIES_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 3);
        // First data row: t=0.5, cell 1, z = dz/2.
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[0], "0.5");
        assert_eq!(first[1], "1");
        let dz = scenario.grid.dz();
        assert_eq!(first[2].parse::<f64>().unwrap(), dz / 2.0);
        assert_eq!(first.len(), TIME_SERIES_HEADER.split(',').count());
    }

    #[test]
    fn steady_table_appends_the_reaction_rate() {
        let scenario = test_scenario(2);
        let (x, y) = consistent_init(&scenario).unwrap();
        let table = steady_table(&scenario, &x, &y).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], STEADY_HEADER);
        assert_eq!(lines.len(), 1 + 2);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), STEADY_HEADER.split(',').count());
        let c_kao: f64 = first[2].parse().unwrap();
        let t_s: f64 = first[7].parse().unwrap();
        let rate: f64 = first.last().unwrap().parse().unwrap();
        let expected = scenario.kinetics.rate(c_kao, t_s).unwrap();
        assert_eq!(rate, expected);
    }
}
