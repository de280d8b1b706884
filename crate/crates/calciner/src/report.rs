//! The run report: a TOML summary written next to the data tables.
//!
//! It records what ran, how long it took, which config fields fell back to
//! built-in defaults (separating out the ones that are pure engineering
//! assumptions), the warning counters, solver statistics, and finally an
//! echo of the fully resolved configuration. The echo is itself a valid
//! config: re-running against the `[config]` section reproduces the
//! scenario exactly.

use serde::Serialize;

use crate::diag::WarningCounts;
use crate::scenario::ScenarioConfig;
use crate::solver::{IntegrationStats, SteadyOutcome};

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Subcommand that produced this report.
    pub command: String,
    pub wall_time_s: f64,
    /// Dotted config paths that used built-in defaults.
    pub defaults_used: Vec<String>,
    /// Defaulted parameters with no measured basis (geometry and
    /// heat-transfer assumptions); worth reviewing before trusting a run.
    pub assumed_defaults: Vec<String>,
    pub warnings: WarningCounts,
    /// Transient integration statistics, when the run integrated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationStats>,
    /// Steady-state solution statistics, when the run solved for one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySummary>,
    /// The fully resolved configuration this run used. Kept last so the
    /// report stays readable top-down.
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadySummary {
    pub newton_iterations: usize,
    /// Scaled residual infinity norm at acceptance.
    pub residual_norm: f64,
    /// True when the first iteration stalled and the solution needed the
    /// long relaxation fallback.
    pub fell_back: bool,
    /// Cost of the relaxation integrations.
    pub relaxation: IntegrationStats,
}

impl SteadySummary {
    pub fn from_outcome(outcome: &SteadyOutcome) -> Self {
        SteadySummary {
            newton_iterations: outcome.newton_iterations,
            residual_norm: outcome.residual_norm,
            fell_back: outcome.fell_back,
            relaxation: outcome.relaxation.clone(),
        }
    }
}

impl RunReport {
    /// Renders the report as TOML text.
    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    const MINIMAL: &str = r#"
        [boundary]
        c_in_mol_per_m3 = [0.15, 0.31, 3.74, 5.81, 0.79]
        t_solid_in_k = 657.15
        t_gas_in_k = 1261.15

        [initial]
        c_mol_per_m3 = [0.1, 0.1, 0.1, 19.65, 0.1]
        t_solid_k = 600.0
        t_gas_k = 600.0
    "#;

    fn sample_report() -> RunReport {
        let loaded = scenario::load_str(MINIMAL, None, &[]).unwrap();
        RunReport {
            command: "simulate".into(),
            wall_time_s: 1.25,
            defaults_used: loaded.defaults_used.clone(),
            assumed_defaults: loaded.assumed_defaults.clone(),
            warnings: WarningCounts {
                mach_exceedances: 2,
                heat_capacity_range_clamps: 0,
                negative_velocities: 0,
            },
            integration: Some(IntegrationStats::default()),
            steady: None,
            config: loaded.config,
        }
    }

    #[test]
    fn config_echo_re_parses_to_the_identical_scenario() {
        let report = sample_report();
        let text = report.render();
        let parsed: toml::Table = toml::from_str(&text).unwrap();
        let echo = toml::to_string(parsed.get("config").unwrap().as_table().unwrap()).unwrap();
        let reloaded = scenario::load_str(&echo, None, &[]).unwrap();
        assert_eq!(reloaded.config, report.config);
    }

    #[test]
    fn report_lists_warnings_and_assumptions() {
        let report = sample_report();
        let text = report.render();
        assert!(text.contains("mach_exceedances = 2"), "{text}");
        assert!(text.contains("geometry.length_m"), "{text}");
        // The config echo comes last so the summary reads top-down. Its
        // header serializes in dotted form because every config entry is a
        // sub-table.
        let config_at = text.find("[config.").unwrap();
        let warnings_at = text.find("[warnings]").unwrap();
        assert!(warnings_at < config_at);
    }

    #[test]
    fn steady_summary_carries_the_fallback_flag() {
        let mut report = sample_report();
        report.command = "steady".into();
        report.integration = None;
        report.steady = Some(SteadySummary {
            newton_iterations: 4,
            residual_norm: 3.2e-6,
            fell_back: true,
            relaxation: IntegrationStats::default(),
        });
        let text = report.render();
        assert!(text.contains("fell_back = true"), "{text}");
        assert!(!text.contains("[integration]"), "{text}");
    }
}
