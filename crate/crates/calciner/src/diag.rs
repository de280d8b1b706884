//! Warning counters for conditions that degrade model validity without
//! invalidating a run.
//!
//! Residual evaluations happen thousands of times inside Newton iterations,
//! most of them at states the integrator later rejects. To keep warning
//! counts meaningful, the integrator evaluates warnings only at accepted
//! states through a counting [`Diagnostics`] instance and routes everything
//! else through a muted one.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

#[derive(Debug, Default)]
pub struct Diagnostics {
    muted: bool,
    mach_exceedances: AtomicU64,
    heat_capacity_range_clamps: AtomicU64,
    negative_velocities: AtomicU64,
}

/// Snapshot of the counters, embedded in run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WarningCounts {
    pub mach_exceedances: u64,
    pub heat_capacity_range_clamps: u64,
    pub negative_velocities: u64,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts but never logs; for evaluations at trial states.
    pub fn muted() -> Self {
        Self {
            muted: true,
            ..Self::default()
        }
    }

    pub fn record_mach_exceedance(&self, mach: f64, interface: usize) {
        let first = self.mach_exceedances.fetch_add(1, Ordering::Relaxed) == 0;
        if first && !self.muted {
            log::warn!(
                "Mach {mach:.3} at interface {interface}: the incompressible momentum \
                 closure assumes Mach < 0.2, velocities are no longer reliable"
            );
        }
    }

    pub fn record_heat_capacity_clamp(&self, species: &str, t: f64) {
        let first = self.heat_capacity_range_clamps.fetch_add(1, Ordering::Relaxed) == 0;
        if first && !self.muted {
            log::warn!(
                "heat capacity of {species} evaluated at {t:.1} K, outside its fitted \
                 range; using the clamped endpoint value"
            );
        }
    }

    pub fn record_negative_velocity(&self, v: f64, interface: usize) {
        let first = self.negative_velocities.fetch_add(1, Ordering::Relaxed) == 0;
        if first && !self.muted {
            log::warn!(
                "backflow at interface {interface} (v = {v:.3} m/s): the upwind flux \
                 scheme still advects left-cell values"
            );
        }
    }

    pub fn counts(&self) -> WarningCounts {
        WarningCounts {
            mach_exceedances: self.mach_exceedances.load(Ordering::Relaxed),
            heat_capacity_range_clamps: self.heat_capacity_range_clamps.load(Ordering::Relaxed),
            negative_velocities: self.negative_velocities.load(Ordering::Relaxed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_start_at_zero_and_accumulate() {
        let diag = Diagnostics::new();
        assert_eq!(
            diag.counts(),
            WarningCounts {
                mach_exceedances: 0,
                heat_capacity_range_clamps: 0,
                negative_velocities: 0,
            }
        );
        diag.record_mach_exceedance(0.25, 0);
        diag.record_mach_exceedance(0.30, 3);
        diag.record_heat_capacity_clamp("kaolinite", 812.0);
        diag.record_negative_velocity(-4.0, 21);
        let counts = diag.counts();
        assert_eq!(counts.mach_exceedances, 2);
        assert_eq!(counts.heat_capacity_range_clamps, 1);
        assert_eq!(counts.negative_velocities, 1);
    }

    #[test]
    fn muted_instance_still_counts() {
        let diag = Diagnostics::muted();
        diag.record_negative_velocity(-1.0, 0);
        assert_eq!(diag.counts().negative_velocities, 1);
    }
}
