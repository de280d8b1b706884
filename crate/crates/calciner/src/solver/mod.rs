//! Implicit integration and steady-state solution of semi-explicit index-1
//! differential-algebraic systems
//!
//! ```text
//! dx/dt = f(x, y),      0 = g(x, y),
//! ```
//!
//! where `x` is the differential state and `y` the algebraic state. Systems
//! plug in through [`DaeSystem`]; Jacobians are always approximated by
//! finite differences, optionally accelerated by a column partition that
//! groups structurally independent columns.

pub mod bdf;
pub mod fd;
pub mod init;
pub mod newton;
pub mod steady;

pub use bdf::{integrate, IntegrationStats, Trajectory};
pub use fd::{dense_partition, system_jacobian, FdColumn, FdPartition, FdScratch};
pub use steady::{steady_state, SteadyOutcome};

use thiserror::Error;

use crate::diag::Diagnostics;

/// A model evaluation rejected the state it was handed.
#[derive(Debug, Error)]
#[error("model evaluation failed: {context}")]
pub struct EvalFailure {
    pub context: String,
}

/// Semi-explicit DAE with `n_differential` rows of `dx/dt = f` followed by
/// `n_algebraic` rows of `0 = g`. Packed vectors always store the
/// differential block first.
pub trait DaeSystem {
    fn n_differential(&self) -> usize;

    fn n_algebraic(&self) -> usize;

    fn n_total(&self) -> usize {
        self.n_differential() + self.n_algebraic()
    }

    /// Writes `f(x, y)` and `g(x, y)`. Failures are recoverable: the caller
    /// retries from a different state with a smaller step.
    fn eval(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
        f: &mut [f64],
        g: &mut [f64],
        diag: &Diagnostics,
    ) -> Result<(), EvalFailure>;

    /// Column grouping for finite-difference Jacobians. The default probes
    /// one column at a time.
    fn fd_partition(&self) -> FdPartition {
        dense_partition(self.n_total(), self.n_total())
    }

    /// Smallest magnitude considered significant for the packed variable at
    /// `index`, used to size finite-difference perturbations.
    fn fd_floor(&self, _index: usize) -> f64 {
        1.0
    }

    /// Polish the algebraic state of an accepted point so `g` is as close to
    /// zero as the arithmetic allows. The default keeps `y` as solved.
    fn refine_algebraic(
        &self,
        _t: f64,
        _x: &[f64],
        _y: &mut [f64],
        _diag: &Diagnostics,
    ) -> Result<(), EvalFailure> {
        Ok(())
    }

    /// Report modeling-assumption violations of an accepted state.
    fn collect_warnings(&self, _t: f64, _x: &[f64], _y: &[f64], _diag: &Diagnostics) {}

    /// Typical magnitude of each algebraic residual row, used to scale
    /// steady-state convergence tests.
    fn algebraic_residual_scales(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(1.0);
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative tolerance on the differential state.
    pub rtol: f64,
    /// Absolute tolerance on the differential state.
    pub atol: f64,
    /// First step size; chosen from the initial slope when `None`.
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub max_step: Option<f64>,
    pub max_newton_iterations: usize,
    /// Corrector stops once the scaled update norm falls below this. Kept
    /// well under the per-step error allowance so corrector leftovers stay
    /// out of the step-size control.
    pub newton_tolerance: f64,
    /// Accepted steps a Jacobian may serve before it is rebuilt.
    pub max_jacobian_age: usize,
    /// Highest backward-differentiation order (1 or 2).
    pub max_order: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: 1e-6,
            atol: 1e-8,
            initial_step: None,
            min_step: 1e-12,
            max_step: None,
            max_newton_iterations: 12,
            newton_tolerance: 1e-5,
            max_jacobian_age: 25,
            max_order: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(SolverError::InvalidInput(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.min_step > 0.0) {
            return Err(SolverError::InvalidInput(
                "minimum step must be positive".into(),
            ));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(SolverError::InvalidInput(
                    "initial step must be positive".into(),
                ));
            }
        }
        if let Some(h) = self.max_step {
            if !(h >= self.min_step) {
                return Err(SolverError::InvalidInput(
                    "maximum step must be at least the minimum step".into(),
                ));
            }
        }
        if self.max_newton_iterations == 0 {
            return Err(SolverError::InvalidInput(
                "at least one Newton iteration is required".into(),
            ));
        }
        if !(self.newton_tolerance > 0.0) {
            return Err(SolverError::InvalidInput(
                "Newton tolerance must be positive".into(),
            ));
        }
        if !(1..=2).contains(&self.max_order) {
            return Err(SolverError::InvalidInput(
                "integration order must be 1 or 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("{context}: iteration failed to converge")]
    NonConvergence { context: String },
    #[error("{context}: Jacobian is singular")]
    SingularJacobian { context: String },
    #[error("{context}: {source}")]
    EvalFailed {
        context: String,
        #[source]
        source: EvalFailure,
    },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
}

/// Root-mean-square of `values[i] / scales[i]`.
pub(crate) fn wrms(values: &[f64], scales: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), scales.len());
    if values.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (&v, &s) in values.iter().zip(scales) {
        let r = v / s;
        acc += r * r;
    }
    (acc / values.len() as f64).sqrt()
}

/// Fills `out[i] = atol + rtol * |state[i]|`.
pub(crate) fn error_scales(state: &[f64], rtol: f64, atol: f64, out: &mut [f64]) {
    debug_assert_eq!(state.len(), out.len());
    for (slot, &v) in out.iter_mut().zip(state) {
        *slot = atol + rtol * v.abs();
    }
}

/// Evaluates the packed residual `[f; g]` of a packed state `[x; y]`.
pub(crate) fn eval_packed(
    system: &dyn DaeSystem,
    t: f64,
    z: &[f64],
    out: &mut [f64],
    diag: &Diagnostics,
) -> Result<(), EvalFailure> {
    let nd = system.n_differential();
    let (x, y) = z.split_at(nd);
    let (f, g) = out.split_at_mut(nd);
    system.eval(t, x, y, f, g, diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrms_matches_hand_computation() {
        let values = [3.0, -4.0];
        let scales = [1.0, 2.0];
        // sqrt((9 + 4) / 2)
        assert!((wrms(&values, &scales) - (6.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(wrms(&[], &[]), 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig::default();
        c.rtol = 0.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.max_order = 3;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.max_step = Some(1e-15);
        assert!(c.validate().is_err());
    }
}
