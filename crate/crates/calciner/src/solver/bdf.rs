//! Variable-step backward-differentiation integration of orders 1 and 2.
//!
//! Each step solves the implicit system
//!
//! ```text
//! (c0 x_new + history) / h - f(x_new, y_new) = 0,      g(x_new, y_new) = 0
//! ```
//!
//! with a modified Newton iteration: the finite-difference Jacobian is
//! reused across steps until it ages out or the corrector fails on it, and
//! the LU factorization is reused until the leading coefficient `c0 / h`
//! drifts too far from the factored value. Step sizes adapt to a local
//! error estimate from the difference between the corrected solution and a
//! polynomial predictor; each step is held to a small fraction of the
//! tolerance budget so the accumulated error stays near the tolerances.
//! Steps land exactly on the requested sample times.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::Serialize;

use super::fd::{self, FdScratch};
use super::{
    error_scales, eval_packed, wrms, DaeSystem, FdPartition, SolverConfig, SolverError,
};
use crate::diag::Diagnostics;

const STEP_SAFETY: f64 = 0.9;
const MAX_GROWTH_ON_ACCEPT: f64 = 2.5;
const MIN_SHRINK_ON_ACCEPT: f64 = 0.2;
const MAX_SHRINK_ON_REJECT: f64 = 0.5;
const MIN_SHRINK_ON_REJECT: f64 = 0.1;
const NEWTON_FAIL_SHRINK: f64 = 0.25;
/// Refactor once `c0 / h` moved this far (relatively) from the factored one.
const REFACTOR_THRESHOLD: f64 = 0.3;
/// Corrector updates must shrink by at least this factor per iteration.
const DIVERGENCE_RATIO: f64 = 0.9;
/// This many error rejections in a row drop the method back to order 1.
const ERROR_REJECTS_FOR_ORDER_DROP: u32 = 3;
/// Attempts without an accepted step before the integration gives up.
const MAX_ATTEMPTS_PER_ACCEPT: u32 = 1000;
/// Target size of the first step, as a weighted state change.
const FIRST_STEP_TARGET: f64 = 0.01;
/// Fraction of the weighted tolerances a single step's local error may use.
/// Local errors compound over the many steps of a run: with the full budget
/// per step, the accumulated drift on smooth trajectories is orders of
/// magnitude above the tolerances at this method order. Holding each step to
/// a small share keeps the end-to-end error near the requested tolerances
/// while still letting stiff transients pass at stability-limited step sizes.
const STEP_ERROR_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Default, Serialize)]
pub struct IntegrationStats {
    pub steps_accepted: u64,
    pub steps_rejected_error: u64,
    pub steps_rejected_newton: u64,
    pub newton_iterations: u64,
    pub residual_evaluations: u64,
    pub jacobian_evaluations: u64,
    pub lu_factorizations: u64,
    pub wall_seconds: f64,
}

impl IntegrationStats {
    /// Adds the counters and wall time of another run into this one.
    pub fn absorb(&mut self, other: &IntegrationStats) {
        self.steps_accepted += other.steps_accepted;
        self.steps_rejected_error += other.steps_rejected_error;
        self.steps_rejected_newton += other.steps_rejected_newton;
        self.newton_iterations += other.newton_iterations;
        self.residual_evaluations += other.residual_evaluations;
        self.jacobian_evaluations += other.jacobian_evaluations;
        self.lu_factorizations += other.lu_factorizations;
        self.wall_seconds += other.wall_seconds;
    }
}

/// Sampled solution of one integration run. States are packed `[x; y]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.times
            .last()
            .map(|&t| (t, self.states.last().expect("states match times").as_slice()))
    }
}

/// Integrates the system from the consistent state `(x0, y0)` over
/// `[0, horizon]`, recording the state at `horizon * k / samples` for
/// `k = 1..=samples`.
pub fn integrate(
    system: &dyn DaeSystem,
    x0: &[f64],
    y0: &[f64],
    config: &SolverConfig,
    horizon: f64,
    samples: usize,
    diag: &Diagnostics,
) -> Result<Trajectory, SolverError> {
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
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "horizon must be finite and non-negative, got {horizon}"
        )));
    }
    if horizon == 0.0 || samples == 0 {
        return Ok(Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            stats: IntegrationStats::default(),
        });
    }

    let n = nd + na;
    let z0 = DVector::from_iterator(n, x0.iter().chain(y0).copied());
    let integrator = Integrator {
        system,
        config,
        diag,
        muted: Diagnostics::muted(),
        nd,
        n,
        partition: system.fd_partition(),
        scratch: FdScratch::new(n),
        jac: DMatrix::zeros(n, n),
        have_jac: false,
        jac_age: 0,
        lu: None,
        lu_scale: 0.0,
        hist_t: Vec::new(),
        hist_z: Vec::new(),
        initial_slope: None,
        steps_since_order_reset: 0,
        stats: IntegrationStats::default(),
    };
    integrator.run(z0, horizon, samples)
}

enum Corrector {
    Converged(DVector<f64>),
    NonConverged,
    EvalFailed,
}

enum LinearizationFailure {
    Eval,
    Singular,
}

struct Integrator<'a> {
    system: &'a dyn DaeSystem,
    config: &'a SolverConfig,
    diag: &'a Diagnostics,
    muted: Diagnostics,
    nd: usize,
    n: usize,
    partition: FdPartition,
    scratch: FdScratch,
    jac: DMatrix<f64>,
    have_jac: bool,
    jac_age: usize,
    lu: Option<LU<f64, Dyn, Dyn>>,
    lu_scale: f64,
    /// Most recent accepted points, oldest first; at most three.
    hist_t: Vec<f64>,
    hist_z: Vec<DVector<f64>>,
    /// dx/dt at the initial point, for the very first prediction.
    initial_slope: Option<Vec<f64>>,
    steps_since_order_reset: usize,
    stats: IntegrationStats,
}

impl<'a> Integrator<'a> {
    fn run(
        mut self,
        z0: DVector<f64>,
        horizon: f64,
        samples: usize,
    ) -> Result<Trajectory, SolverError> {
        let start = Instant::now();
        let mut times = Vec::with_capacity(samples);
        let mut states = Vec::with_capacity(samples);

        let mut fg = vec![0.0; self.n];
        eval_packed(self.system, 0.0, z0.as_slice(), &mut fg, &self.muted).map_err(|e| {
            SolverError::EvalFailed {
                context: "initial state".into(),
                source: e,
            }
        })?;
        self.stats.residual_evaluations += 1;
        let f0: Vec<f64> = fg[..self.nd].to_vec();

        let first_target = horizon / samples as f64;
        let mut h = match self.config.initial_step {
            Some(h0) => h0,
            None => {
                let mut scales = vec![0.0; self.nd];
                error_scales(&z0.as_slice()[..self.nd], self.config.rtol, self.config.atol, &mut scales);
                let slope = wrms(&f0, &scales);
                if slope > 0.0 {
                    FIRST_STEP_TARGET / slope
                } else {
                    first_target
                }
            }
        };
        h = h.clamp(self.config.min_step, first_target.max(self.config.min_step));
        if let Some(mx) = self.config.max_step {
            h = h.min(mx);
        }

        self.initial_slope = Some(f0);
        self.push_history(0.0, z0);

        let mut t = 0.0;
        let mut next_sample = 1usize;
        let mut consecutive_error_rejects = 0u32;
        let mut attempts_since_accept = 0u32;

        while next_sample <= samples {
            attempts_since_accept += 1;
            if attempts_since_accept > MAX_ATTEMPTS_PER_ACCEPT {
                return Err(SolverError::NonConvergence {
                    context: format!("integration stalled at t = {t}"),
                });
            }

            let target = horizon * next_sample as f64 / samples as f64;
            let gap = target - t;
            let capped = h >= gap;
            let h_attempt = if capped { gap } else { h };
            let t_new = if capped { target } else { t + h_attempt };
            let order = if self.steps_since_order_reset < 2 {
                1
            } else {
                self.config.max_order
            };

            let (c0, hist) = self.bdf_history(order, h_attempt);
            let z_pred = self.predict(t_new, h_attempt);
            let c0_over_h = c0 / h_attempt;

            let fresh = match self.ensure_linearization(t_new, &z_pred, c0_over_h) {
                Ok(fresh) => fresh,
                Err(failure) => {
                    if matches!(failure, LinearizationFailure::Singular) {
                        self.have_jac = false;
                    }
                    self.stats.steps_rejected_newton += 1;
                    h = shrink_after_failure(
                        h_attempt,
                        NEWTON_FAIL_SHRINK,
                        t,
                        capped,
                        self.config.min_step,
                    )?;
                    continue;
                }
            };

            match self.correct(t_new, &z_pred, c0, &hist, h_attempt) {
                Corrector::Converged(z_new) => {
                    let mut scales = vec![0.0; self.nd];
                    error_scales(
                        &z_new.as_slice()[..self.nd],
                        self.config.rtol,
                        self.config.atol,
                        &mut scales,
                    );
                    let diff: Vec<f64> =
                        (0..self.nd).map(|i| z_new[i] - z_pred[i]).collect();
                    let est = wrms(&diff, &scales)
                        / ((order as f64 + 1.0) * STEP_ERROR_FRACTION);
                    let exponent = -1.0 / (order as f64 + 1.0);
                    if est <= 1.0 {
                        self.stats.steps_accepted += 1;
                        self.jac_age += 1;
                        self.steps_since_order_reset += 1;
                        consecutive_error_rejects = 0;
                        attempts_since_accept = 0;

                        let mut z_acc = z_new;
                        {
                            let (x, y) = z_acc.as_mut_slice().split_at_mut(self.nd);
                            // Best-effort polish; a failure keeps the solved y.
                            let _ = self.system.refine_algebraic(t_new, x, y, &self.muted);
                        }
                        {
                            let (x, y) = z_acc.as_slice().split_at(self.nd);
                            self.system.collect_warnings(t_new, x, y, self.diag);
                        }
                        self.push_history(t_new, z_acc.clone());
                        t = t_new;
                        if capped {
                            times.push(target);
                            states.push(z_acc.as_slice().to_vec());
                            next_sample += 1;
                        }
                        let factor = (STEP_SAFETY * est.powf(exponent))
                            .clamp(MIN_SHRINK_ON_ACCEPT, MAX_GROWTH_ON_ACCEPT);
                        h = (h_attempt * factor).max(self.config.min_step);
                        if let Some(mx) = self.config.max_step {
                            h = h.min(mx);
                        }
                    } else {
                        self.stats.steps_rejected_error += 1;
                        consecutive_error_rejects += 1;
                        if consecutive_error_rejects >= ERROR_REJECTS_FOR_ORDER_DROP {
                            self.steps_since_order_reset = 0;
                        }
                        let factor = (STEP_SAFETY * est.powf(exponent))
                            .clamp(MIN_SHRINK_ON_REJECT, MAX_SHRINK_ON_REJECT);
                        h = shrink_after_failure(
                            h_attempt,
                            factor,
                            t,
                            capped,
                            self.config.min_step,
                        )?;
                    }
                }
                Corrector::NonConverged => {
                    self.stats.steps_rejected_newton += 1;
                    if fresh {
                        h = shrink_after_failure(
                            h_attempt,
                            NEWTON_FAIL_SHRINK,
                            t,
                            capped,
                            self.config.min_step,
                        )?;
                    } else {
                        // Retry the same step with a fresh Jacobian.
                        self.have_jac = false;
                    }
                }
                Corrector::EvalFailed => {
                    self.stats.steps_rejected_newton += 1;
                    h = shrink_after_failure(
                        h_attempt,
                        NEWTON_FAIL_SHRINK,
                        t,
                        capped,
                        self.config.min_step,
                    )?;
                }
            }
        }

        self.stats.wall_seconds = start.elapsed().as_secs_f64();
        Ok(Trajectory {
            times,
            states,
            stats: self.stats,
        })
    }

    fn push_history(&mut self, t: f64, z: DVector<f64>) {
        if self.hist_t.len() == 3 {
            self.hist_t.remove(0);
            self.hist_z.remove(0);
        }
        self.hist_t.push(t);
        self.hist_z.push(z);
    }

    /// Leading coefficient `c0` and the history combination for the chosen
    /// order, so that `dx/dt is approximated by (c0 x_new + hist) / h`.
    fn bdf_history(&self, order: usize, h: f64) -> (f64, DVector<f64>) {
        let m = self.hist_t.len();
        let z_n = &self.hist_z[m - 1];
        let mut hist = DVector::zeros(self.nd);
        if order < 2 || m < 2 {
            for i in 0..self.nd {
                hist[i] = -z_n[i];
            }
            (1.0, hist)
        } else {
            let h_prev = self.hist_t[m - 1] - self.hist_t[m - 2];
            let rho = h / h_prev;
            let c0 = (1.0 + 2.0 * rho) / (1.0 + rho);
            let c1 = -(1.0 + rho);
            let c2 = rho * rho / (1.0 + rho);
            let z_p = &self.hist_z[m - 2];
            for i in 0..self.nd {
                hist[i] = c1 * z_n[i] + c2 * z_p[i];
            }
            (c0, hist)
        }
    }

    /// Polynomial extrapolation of the full packed state through the last
    /// (up to three) accepted points; the first step extrapolates along the
    /// initial slope instead.
    fn predict(&self, t_new: f64, h: f64) -> DVector<f64> {
        let m = self.hist_t.len();
        if m == 1 {
            let mut z = self.hist_z[0].clone();
            if let Some(f0) = &self.initial_slope {
                for (i, &fi) in f0.iter().enumerate() {
                    z[i] += h * fi;
                }
            }
            return z;
        }
        let points = m.min(3);
        let ts = &self.hist_t[m - points..];
        let zs = &self.hist_z[m - points..];
        let mut pred = DVector::zeros(self.n);
        for i in 0..points {
            let mut w = 1.0;
            for j in 0..points {
                if j != i {
                    w *= (t_new - ts[j]) / (ts[i] - ts[j]);
                }
            }
            pred.axpy(w, &zs[i], 1.0);
        }
        pred
    }

    /// Makes sure a Jacobian and a factorization compatible with the current
    /// leading coefficient exist. Returns whether the Jacobian was computed
    /// for this very attempt.
    fn ensure_linearization(
        &mut self,
        t: f64,
        z_pred: &DVector<f64>,
        c0_over_h: f64,
    ) -> Result<bool, LinearizationFailure> {
        let mut fresh = false;
        let mut need_factor = self.lu.is_none();
        if !self.have_jac || self.jac_age >= self.config.max_jacobian_age {
            let evals = fd::system_jacobian(
                self.system,
                t,
                z_pred.as_slice(),
                &self.partition,
                &mut self.jac,
                &mut self.scratch,
            )
            .map_err(|_| LinearizationFailure::Eval)?;
            self.stats.residual_evaluations += evals as u64;
            self.stats.jacobian_evaluations += 1;
            self.have_jac = true;
            self.jac_age = 0;
            fresh = true;
            need_factor = true;
        }
        if need_factor || (c0_over_h / self.lu_scale - 1.0).abs() > REFACTOR_THRESHOLD {
            let a = self.build_iteration_matrix(c0_over_h);
            let lu = a.lu();
            if !lu.is_invertible() {
                return Err(LinearizationFailure::Singular);
            }
            self.lu = Some(lu);
            self.lu_scale = c0_over_h;
            self.stats.lu_factorizations += 1;
        }
        Ok(fresh)
    }

    /// `A = d/dz [ (c0 x + hist)/h - f ; g ]` assembled from the cached
    /// residual Jacobian.
    fn build_iteration_matrix(&self, c0_over_h: f64) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for c in 0..self.n {
            for r in 0..self.nd {
                a[(r, c)] = -self.jac[(r, c)];
            }
            for r in self.nd..self.n {
                a[(r, c)] = self.jac[(r, c)];
            }
        }
        for r in 0..self.nd {
            a[(r, r)] += c0_over_h;
        }
        a
    }

    fn correct(
        &mut self,
        t_new: f64,
        z_pred: &DVector<f64>,
        c0: f64,
        hist: &DVector<f64>,
        h: f64,
    ) -> Corrector {
        let mut z = z_pred.clone();
        let mut scales = vec![0.0; self.n];
        error_scales(z_pred.as_slice(), self.config.rtol, self.config.atol, &mut scales);
        let inv_h = 1.0 / h;
        let mut fg = vec![0.0; self.n];
        let mut rhs = DVector::zeros(self.n);
        let mut del_prev: Option<f64> = None;
        for _ in 0..self.config.max_newton_iterations {
            if eval_packed(self.system, t_new, z.as_slice(), &mut fg, &self.muted).is_err() {
                return Corrector::EvalFailed;
            }
            self.stats.residual_evaluations += 1;
            for i in 0..self.nd {
                rhs[i] = -((c0 * z[i] + hist[i]) * inv_h - fg[i]);
            }
            for i in self.nd..self.n {
                rhs[i] = -fg[i];
            }
            let lu = self.lu.as_ref().expect("factorization exists");
            let Some(delta) = lu.solve(&rhs) else {
                return Corrector::NonConverged;
            };
            z += &delta;
            self.stats.newton_iterations += 1;
            let del = wrms(delta.as_slice(), &scales);
            if !del.is_finite() {
                return Corrector::NonConverged;
            }
            if del <= self.config.newton_tolerance {
                return Corrector::Converged(z);
            }
            if let Some(prev) = del_prev {
                if del > DIVERGENCE_RATIO * prev {
                    return Corrector::NonConverged;
                }
            }
            del_prev = Some(del);
        }
        Corrector::NonConverged
    }
}

/// Scales a failed attempt down; capped steps were already shorter than the
/// controller wanted, so they may shrink below the minimum without that
/// counting as underflow.
fn shrink_after_failure(
    h_attempt: f64,
    factor: f64,
    t: f64,
    capped: bool,
    min_step: f64,
) -> Result<f64, SolverError> {
    let h = h_attempt * factor;
    if h < min_step {
        if capped {
            return Ok(min_step);
        }
        return Err(SolverError::StepSizeUnderflow { t, h });
    }
    Ok(h)
}
