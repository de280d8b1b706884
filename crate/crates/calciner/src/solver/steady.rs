//! Steady-state solution of the DAE: find `(x, y)` with `f(x, y) = 0` and
//! `g(x, y) = 0`.
//!
//! A short integration first relaxes the initial state toward the attractor
//! so Newton starts inside its convergence basin. If Newton stalls anyway,
//! the state is relaxed by a much longer integration and Newton runs once
//! more; only a second failure is reported as an error.

use super::bdf::{integrate, IntegrationStats};
use super::newton::{damped_newton, NewtonOptions};
use super::{DaeSystem, SolverConfig, SolverError};
use crate::diag::Diagnostics;
use nalgebra::DVector;

/// Convergence threshold on the scaled residual infinity norm. Rows whose
/// residual cannot be driven this low in double precision (energy balances
/// respond to single-ulp pressure changes by more than this) are covered by
/// the attainability floor inside the Newton iteration; at acceptance the
/// state sits within a few ulp of the exact root.
const STEADY_TOLERANCE: f64 = 1e-5;
const MAX_NEWTON_ITERATIONS: usize = 50;
const MAX_HALVINGS: u32 = 8;
const MAX_STALLS: u32 = 2;
/// The fallback relaxation integrates this much longer than the first one.
const FALLBACK_FACTOR: f64 = 30.0;
/// Fallback relaxation time when the first relaxation was skipped, s.
const DEFAULT_FALLBACK_TIME: f64 = 300.0;

#[derive(Debug, Clone)]
pub struct SteadyOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Newton stalled once and the solution needed the long relaxation.
    pub fell_back: bool,
    pub newton_iterations: usize,
    /// Scaled residual infinity norm at the solution.
    pub residual_norm: f64,
    /// Combined cost of the relaxation integrations.
    pub relaxation: IntegrationStats,
}

/// Solves for the steady state reached from `(x0, y0)`.
///
/// `relax_time` is the horizon of the initial relaxation integration; zero
/// skips it. Warnings are collected once, at the converged state.
pub fn steady_state(
    system: &dyn DaeSystem,
    x0: &[f64],
    y0: &[f64],
    config: &SolverConfig,
    relax_time: f64,
    diag: &Diagnostics,
) -> Result<SteadyOutcome, SolverError> {
    config.validate()?;
    let nd = system.n_differential();
    let na = system.n_algebraic();
    if x0.len() != nd || y0.len() != na {
        return Err(SolverError::InvalidInput(format!(
            "state length mismatch: got {}+{}, system wants {nd}+{na}",
            x0.len(),
            y0.len()
        )));
    }
    if !relax_time.is_finite() || relax_time < 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "relaxation time must be finite and non-negative, got {relax_time}"
        )));
    }

    let muted = Diagnostics::muted();
    let mut relaxation = IntegrationStats::default();
    let mut z = DVector::from_iterator(nd + na, x0.iter().chain(y0).copied());
    if relax_time > 0.0 {
        let traj = integrate(system, x0, y0, config, relax_time, 1, &muted)?;
        relaxation.absorb(&traj.stats);
        let (_, state) = traj.last().expect("one sample requested");
        z = DVector::from_column_slice(state);
    }

    let partition = system.fd_partition();
    let options = NewtonOptions {
        max_iterations: MAX_NEWTON_ITERATIONS,
        tolerance: STEADY_TOLERANCE,
        max_halvings: MAX_HALVINGS,
        max_stalls: MAX_STALLS,
    };
    let rtol = config.rtol;
    let atol = config.atol;
    let scales = move |zv: &[f64], out: &mut [f64]| {
        let (x, y) = zv.split_at(nd);
        for i in 0..nd {
            out[i] = atol + rtol * x[i].abs().max(system.fd_floor(i));
        }
        let mut magnitudes = vec![1.0; na];
        system.algebraic_residual_scales(x, y, &mut magnitudes);
        for (slot, &m) in out[nd..].iter_mut().zip(&magnitudes) {
            *slot = atol + rtol * m;
        }
    };

    let mut fell_back = false;
    let solution = match damped_newton(system, z, &scales, &partition, &options) {
        Ok(success) => success,
        Err(stall) => {
            log::warn!(
                "steady-state iteration stalled ({}, best scaled residual {:.3e}); \
                 relaxing by integration and retrying",
                stall.reason,
                stall.best_norm
            );
            fell_back = true;
            let fallback_time = if relax_time > 0.0 {
                relax_time * FALLBACK_FACTOR
            } else {
                DEFAULT_FALLBACK_TIME
            };
            let (bx, by) = stall.best_z.as_slice().split_at(nd);
            let traj = integrate(system, bx, by, config, fallback_time, 1, &muted)?;
            relaxation.absorb(&traj.stats);
            let (_, state) = traj.last().expect("one sample requested");
            let z = DVector::from_column_slice(state);
            damped_newton(system, z, &scales, &partition, &options).map_err(|second| {
                SolverError::NonConvergence {
                    context: format!("steady state ({})", second.reason),
                }
            })?
        }
    };

    let (x_part, y_part) = solution.z.as_slice().split_at(nd);
    let x = x_part.to_vec();
    let mut y = y_part.to_vec();
    let _ = system.refine_algebraic(0.0, &x, &mut y, &muted);
    system.collect_warnings(0.0, &x, &y, diag);
    Ok(SteadyOutcome {
        x,
        y,
        fell_back,
        newton_iterations: solution.iterations,
        residual_norm: solution.residual_norm,
        relaxation,
    })
}
