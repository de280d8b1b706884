//! Command-line interface: subcommand dispatch, file emission, and the
//! exit-code contract.
//!
//! Exit codes: 0 success, 2 configuration or validation failure, 3 numerical
//! or output failure. There are no other codes; argument parsing errors also
//! exit with 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::data::{self, DataError};
use crate::diag::Diagnostics;
use crate::model::{CalcinerSystem, ModelError};
use crate::output::{self, OutputError};
use crate::report::{RunReport, SteadySummary};
use crate::scenario::{self, ConfigError, LoadedScenario};
use crate::solver::{self, init::consistent_init, SolverError};
use crate::thermo::SpeciesThermo;
use crate::transport;

/// Simulates a flash clay calciner as a plug-flow reactor.
#[derive(Debug, Parser)]
#[command(name = "calciner", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for data tables and the run report.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Simulation horizon, s; overrides solver.horizon_s.
    #[arg(long, global = true, value_name = "SECONDS")]
    horizon: Option<f64>,

    /// Samples in the time-series table; overrides output.samples.
    #[arg(long, global = true, value_name = "COUNT")]
    samples: Option<usize>,

    /// Config override as dotted.path=value; repeatable. Values use the
    /// config file grammar, so arrays like [0.2, 0.2, 0.2, 0.2, 0.2] work.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the transient and write the per-cell time-series table.
    Simulate,
    /// Solve for the steady state and write the per-cell profile table.
    Steady,
    /// Print species properties over a temperature range.
    Props(PropsArgs),
    /// Check a config and report derived initial-state quantities without
    /// integrating.
    Validate,
}

#[derive(Debug, Args)]
struct PropsArgs {
    /// Species name as listed in the species data file.
    species: String,

    /// Lowest temperature in the table, K.
    #[arg(long, default_value_t = 300.0, value_name = "KELVIN", allow_negative_numbers = true)]
    t_min: f64,

    /// Highest temperature in the table, K.
    #[arg(long, default_value_t = 1500.0, value_name = "KELVIN", allow_negative_numbers = true)]
    t_max: f64,

    /// Rows in the table, spread uniformly over [t-min, t-max].
    #[arg(long, default_value_t = 13, value_name = "COUNT")]
    points: usize,

    /// Pressure used for the molar volume column, Pa.
    #[arg(long, default_value_t = 101_325.0, value_name = "PASCAL")]
    pressure: f64,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("unknown species {name:?}; available: {available}")]
    UnknownSpecies { name: String, available: String },
    #[error("{0}")]
    BadArguments(String),
    #[error("--config is required for this command")]
    MissingConfig,
}

impl CliError {
    /// 2 for configuration and validation problems, 3 for numerical or
    /// output failures.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Data(_)
            | CliError::Model(_)
            | CliError::UnknownSpecies { .. }
            | CliError::BadArguments(_)
            | CliError::MissingConfig => 2,
            CliError::Solver(_) | CliError::Output(_) => 3,
        }
    }
}

/// Parses arguments and runs; the process exit code follows the contract
/// above.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match &cli.command {
        Command::Simulate => run_simulate(&cli, started),
        Command::Steady => run_steady(&cli, started),
        Command::Props(args) => run_props(&cli, args),
        Command::Validate => run_validate(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code())
        }
    }
}

/// Loads the scenario with --override, --horizon and --samples applied; the
/// dedicated flags win over generic overrides.
fn load(cli: &Cli) -> Result<LoadedScenario, CliError> {
    let path = cli.config.as_deref().ok_or(CliError::MissingConfig)?;
    let mut overrides = cli.overrides.clone();
    if let Some(h) = cli.horizon {
        overrides.push(format!("solver.horizon_s={h}"));
    }
    if let Some(s) = cli.samples {
        overrides.push(format!("output.samples={s}"));
    }
    Ok(scenario::load_file(path, &overrides)?)
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Output(OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn run_simulate(cli: &Cli, started: Instant) -> Result<(), CliError> {
    let loaded = load(cli)?;
    ensure_out_dir(&cli.out)?;
    let diag = Diagnostics::new();
    let system = CalcinerSystem::new(loaded.scenario.clone());
    let (x0, y0) = consistent_init(system.scenario())?;
    let horizon = loaded.horizon();
    let trajectory = solver::integrate(
        &system,
        &x0,
        &y0,
        &loaded.solver,
        horizon,
        loaded.samples(),
        &diag,
    )?;
    let table = output::time_series_table(system.scenario(), &trajectory.times, &trajectory.states)?;
    output::write_atomic(&cli.out.join("time_series.csv"), &table)?;

    let report = RunReport {
        command: "simulate".into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        defaults_used: loaded.defaults_used,
        assumed_defaults: loaded.assumed_defaults,
        warnings: diag.counts(),
        integration: Some(trajectory.stats.clone()),
        steady: None,
        config: loaded.config,
    };
    output::write_atomic(&cli.out.join("run_report.toml"), &report.render())?;
    println!(
        "simulated {horizon} s in {} accepted steps; tables in {}",
        trajectory.stats.steps_accepted,
        cli.out.display()
    );
    Ok(())
}

fn run_steady(cli: &Cli, started: Instant) -> Result<(), CliError> {
    let loaded = load(cli)?;
    ensure_out_dir(&cli.out)?;
    let diag = Diagnostics::new();
    let system = CalcinerSystem::new(loaded.scenario.clone());
    let (x0, y0) = consistent_init(system.scenario())?;
    let outcome = solver::steady_state(
        &system,
        &x0,
        &y0,
        &loaded.solver,
        loaded.relaxation(),
        &diag,
    )?;
    let table = output::steady_table(system.scenario(), &outcome.x, &outcome.y)?;
    output::write_atomic(&cli.out.join("steady_profile.csv"), &table)?;

    let report = RunReport {
        command: "steady".into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        defaults_used: loaded.defaults_used,
        assumed_defaults: loaded.assumed_defaults,
        warnings: diag.counts(),
        integration: None,
        steady: Some(SteadySummary::from_outcome(&outcome)),
        config: loaded.config,
    };
    output::write_atomic(&cli.out.join("run_report.toml"), &report.render())?;
    println!(
        "steady state in {} iterations (scaled residual {:.2e}); tables in {}",
        outcome.newton_iterations,
        outcome.residual_norm,
        cli.out.display()
    );
    Ok(())
}

fn run_props(cli: &Cli, args: &PropsArgs) -> Result<(), CliError> {
    if !(args.t_min.is_finite() && args.t_min > 0.0) || !(args.t_max >= args.t_min) {
        return Err(CliError::BadArguments(format!(
            "temperature range [{}, {}] K must be positive and ordered",
            args.t_min, args.t_max
        )));
    }
    if args.points == 0 {
        return Err(CliError::BadArguments("--points must be at least 1".into()));
    }
    if !(args.pressure.is_finite() && args.pressure > 0.0) {
        return Err(CliError::BadArguments(format!(
            "--pressure must be positive, got {}",
            args.pressure
        )));
    }

    // A config supplies alternative species data; otherwise the embedded
    // data set serves.
    let table: Vec<SpeciesThermo> = match &cli.config {
        Some(_) => load(cli)?.scenario.species().to_vec(),
        None => data::load_model_set(data::EMBEDDED_SPECIES_DATA)?.table,
    };
    let species = table.iter().find(|s| s.name == args.species).ok_or_else(|| {
        CliError::UnknownSpecies {
            name: args.species.clone(),
            available: table
                .iter()
                .map(|s| s.name.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        }
    })?;

    println!("t_k,cp_j_per_mol_k,h_j_per_mol,v_m3_per_mol,outside_fit_range");
    let span = args.t_max - args.t_min;
    let diag = Diagnostics::muted();
    let mut clamps_seen = 0;
    for k in 0..args.points {
        let fraction = if args.points == 1 {
            0.0
        } else {
            k as f64 / (args.points - 1) as f64
        };
        let t = args.t_min + span * fraction;
        let cp = species.heat_capacity(t, &diag).map_err(ModelError::from)?;
        let h = species.molar_enthalpy(t, &diag).map_err(ModelError::from)?;
        let v = species.molar_volume(t, args.pressure).map_err(ModelError::from)?;
        let clamps = diag.counts().heat_capacity_range_clamps;
        let outside = clamps > clamps_seen;
        clamps_seen = clamps;
        println!("{t},{cp},{h},{v},{outside}");
    }
    Ok(())
}

fn run_validate(cli: &Cli) -> Result<(), CliError> {
    let loaded = load(cli)?;
    let scenario = &loaded.scenario;
    let (x, y) = consistent_init(scenario)?;
    let diag = Diagnostics::muted();
    let fields = scenario.evaluate_fields(&x, &y, &diag)?;
    let layout = scenario.layout();

    println!("configuration is feasible");
    println!("cells: {}", scenario.grid.n_cells);
    let pressures: Vec<f64> = (0..scenario.grid.n_cells)
        .map(|cell| y[layout.pressure(cell)])
        .collect();
    let p_min = pressures.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = pressures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("initial pressure: {p_min} Pa (uniform within [{p_min}, {p_max}])");
    println!(
        "initial solid volume fraction: {}",
        fields.solid_volume_fractions[0]
    );
    let v_in = fields.interface_velocities[0];
    let mach = transport::mach_number(v_in, scenario.boundary.t_gas_in);
    println!("inlet velocity: {v_in} m/s (Mach {mach:.4})");
    if mach >= 0.2 {
        println!("note: inlet Mach exceeds 0.2; the incompressible closure is strained");
    }
    if !loaded.assumed_defaults.is_empty() {
        println!("assumed defaults: {}", loaded.assumed_defaults.join(", "));
    }
    Ok(())
}
