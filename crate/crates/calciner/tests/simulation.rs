//! Cross-module integration tests: the transient integrator, the steady
//! solver, and the diagnostics layer working against the bundled scenario.

use calciner::diag::Diagnostics;
use calciner::model::{CalcinerSystem, Scenario, StateLayout, N_SPECIES};
use calciner::scenario::{self, LoadedScenario};
use calciner::solver::{self, init::consistent_init};

fn baseline(overrides: &[&str]) -> LoadedScenario {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/baseline.toml");
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    scenario::load_file(path.as_ref(), &overrides).expect("bundled config must load")
}

/// Relative gap with a per-quantity floor so near-zero slots (consumed
/// kaolinite, trace velocities) compare against their natural scale rather
/// than against themselves.
fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / (floor + a.abs().max(b.abs()))
}

/// Floor for each packed differential/algebraic slot: the inlet scale of the
/// quantity kind living there.
fn slot_floors(scenario: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let layout = scenario.layout();
    let c_scale = scenario
        .boundary
        .c_in
        .iter()
        .fold(f64::MIN, |m, &c| m.max(c));
    let mut x = vec![0.0; layout.n_differential()];
    let mut y = vec![0.0; layout.n_algebraic()];
    for cell in 0..layout.n_cells {
        for species in 0..N_SPECIES {
            x[layout.concentration(cell, species)] = c_scale;
        }
        x[layout.solid_energy(cell)] = 1e6;
        x[layout.gas_energy(cell)] = 1e6;
        y[layout.solid_temperature(cell)] = 1e3;
        y[layout.gas_temperature(cell)] = 1e3;
        y[layout.pressure(cell)] = 1e5;
    }
    (x, y)
}

struct SteadyPair {
    x: Vec<f64>,
    y: Vec<f64>,
    layout: StateLayout,
}

fn solve_steady(loaded: &LoadedScenario) -> SteadyPair {
    let diag = Diagnostics::muted();
    let system = CalcinerSystem::new(loaded.scenario.clone());
    let (x0, y0) = consistent_init(system.scenario()).unwrap();
    let outcome = solver::steady_state(
        &system,
        &x0,
        &y0,
        &loaded.solver,
        loaded.relaxation(),
        &diag,
    )
    .expect("steady solve");
    SteadyPair {
        x: outcome.x,
        y: outcome.y,
        layout: loaded.scenario.layout(),
    }
}

#[test]
fn transient_end_state_matches_the_newton_steady_state() {
    let loaded = baseline(&[]);
    let diag = Diagnostics::muted();
    let system = CalcinerSystem::new(loaded.scenario.clone());
    let (x0, y0) = consistent_init(system.scenario()).unwrap();
    let trajectory = solver::integrate(
        &system,
        &x0,
        &y0,
        &loaded.solver,
        60.0,
        60,
        &diag,
    )
    .unwrap();
    let (_, settled) = trajectory.last().expect("samples");

    let steady = solve_steady(&loaded);
    let (x_floor, y_floor) = slot_floors(&loaded.scenario);
    let nd = steady.layout.n_differential();

    let mut worst = 0.0_f64;
    for (i, floor) in x_floor.iter().enumerate() {
        worst = worst.max(relative_gap(settled[i], steady.x[i], *floor));
    }
    for (j, floor) in y_floor.iter().enumerate() {
        worst = worst.max(relative_gap(settled[nd + j], steady.y[j], *floor));
    }
    assert!(
        worst < 1e-6,
        "settled transient and Newton steady state disagree by {worst:.3e}"
    );
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let loaded = baseline(&[]);
    let run = || {
        let diag = Diagnostics::muted();
        let system = CalcinerSystem::new(loaded.scenario.clone());
        let (x0, y0) = consistent_init(system.scenario()).unwrap();
        solver::integrate(&system, &x0, &y0, &loaded.solver, 2.0, 10, &diag).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first.times, second.times);
    assert_eq!(first.states, second.states, "integration must be deterministic");

    let a = solve_steady(&loaded);
    let b = solve_steady(&loaded);
    assert_eq!(a.x, b.x, "steady solve must be deterministic");
    assert_eq!(a.y, b.y);
}

#[test]
fn steady_state_is_insensitive_to_the_initial_guess() {
    let reference = solve_steady(&baseline(&[]));
    // A different composition and 100-200 K hotter phases; the gas content
    // is chosen to keep the implied initial pressure near ambient, since a
    // large pressure imbalance at t = 0 is outside the flow model's envelope.
    let displaced = solve_steady(&baseline(&[
        "initial.c_mol_per_m3=[0.05, 0.2, 0.4, 14.8, 0.3]",
        "initial.t_solid_k=700.0",
        "initial.t_gas_k=800.0",
    ]));

    let scenario = &baseline(&[]).scenario;
    let (x_floor, y_floor) = slot_floors(scenario);
    let mut worst = 0.0_f64;
    for (i, floor) in x_floor.iter().enumerate() {
        worst = worst.max(relative_gap(reference.x[i], displaced.x[i], *floor));
    }
    for (j, floor) in y_floor.iter().enumerate() {
        worst = worst.max(relative_gap(reference.y[j], displaced.y[j], *floor));
    }
    assert!(
        worst < 1e-6,
        "steady state depends on the initial guess by {worst:.3e}"
    );
}

#[test]
fn cold_start_raises_the_documented_warnings() {
    let loaded = baseline(&[]);
    let diag = Diagnostics::muted();
    let system = CalcinerSystem::new(loaded.scenario.clone());
    let (x0, y0) = consistent_init(system.scenario()).unwrap();
    solver::integrate(&system, &x0, &y0, &loaded.solver, 10.0, 100, &diag).unwrap();
    let counts = diag.counts();
    // The cold start drives huge thermal-expansion velocities (Mach), pulls
    // kaolinite above its fitted heat-capacity range, and briefly reverses
    // interface flow; all three must be visible to the run report.
    assert!(counts.mach_exceedances > 0, "counts: {counts:?}");
    assert!(counts.heat_capacity_range_clamps > 0, "counts: {counts:?}");
    assert!(counts.negative_velocities > 0, "counts: {counts:?}");
}
