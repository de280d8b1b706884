//! Damped Newton iteration on the full packed residual `[f; g] = 0`,
//! used to solve for steady states.
//!
//! Each iteration recomputes the finite-difference Jacobian, solves for the
//! Newton direction, and backtracks the step until the scaled residual
//! infinity norm strictly decreases. A step without any improving damping
//! factor counts as a stall; after too many stalls the caller gets the best
//! iterate back and decides what to do (typically: relax by integrating,
//! then retry).
//!
//! Convergence is tested against the caller's residual scales plus a per-row
//! attainability floor `Σ_j |J_ij|·ε·|z_j|`: the residual change produced by
//! one unit of roundoff in each variable. Rows whose roots fall between
//! representable state values (for example, energy balances driven by
//! pressure drops of a few pascal riding on absolute pressures near 1e5 Pa)
//! count as converged once their residual is indistinguishable from zero at
//! that resolution; no step in representable arithmetic can do better.

use nalgebra::{DMatrix, DVector};

use super::fd::{self, FdScratch};
use super::{eval_packed, DaeSystem, FdPartition};
use crate::diag::Diagnostics;

/// Multiplier on the roundoff-attainability floor in the convergence test.
const ROUNDOFF_FLOOR_SAFETY: f64 = 2.0;

pub(crate) struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the scaled residual infinity norm.
    pub tolerance: f64,
    /// Damping halvings tried per iteration (1, 1/2, ..., 1/2^max).
    pub max_halvings: u32,
    pub max_stalls: u32,
}

pub(crate) struct NewtonSuccess {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// The iteration did not converge; `best_z` is the iterate with the lowest
/// scaled residual norm seen, a sensible restart point.
pub(crate) struct NewtonStall {
    pub best_z: DVector<f64>,
    pub best_norm: f64,
    pub reason: String,
}

/// Scaled infinity norm of the residual.
fn scaled_norm(residual: &[f64], scales: &[f64]) -> f64 {
    residual
        .iter()
        .zip(scales)
        .map(|(&r, &s)| (r / s).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn damped_newton(
    system: &dyn DaeSystem,
    z0: DVector<f64>,
    residual_scales: &dyn Fn(&[f64], &mut [f64]),
    partition: &FdPartition,
    options: &NewtonOptions,
) -> Result<NewtonSuccess, NewtonStall> {
    let n = system.n_total();
    let muted = Diagnostics::muted();
    let mut scratch = FdScratch::new(n);
    let mut jac = DMatrix::zeros(n, n);
    let mut fg = vec![0.0; n];
    let mut scales = vec![1.0; n];
    let mut floors = vec![0.0; n];
    let mut eff_scales = vec![1.0; n];

    let mut z = z0;
    if let Err(e) = eval_packed(system, 0.0, z.as_slice(), &mut fg, &muted) {
        return Err(NewtonStall {
            best_z: z,
            best_norm: f64::INFINITY,
            reason: format!("starting point rejected: {e}"),
        });
    }
    let mut best_z = z.clone();
    let mut best_norm = f64::INFINITY;
    let mut stalls = 0u32;

    for iteration in 0..options.max_iterations {
        if fd::system_jacobian(system, 0.0, z.as_slice(), partition, &mut jac, &mut scratch)
            .is_err()
        {
            return Err(NewtonStall {
                best_z,
                best_norm,
                reason: "Jacobian evaluation failed".into(),
            });
        }

        // Attainability floor per row, folded into the scales so that the
        // convergence test reads |F_i| <= tol*scale_i + safety*floor_i.
        floors.fill(0.0);
        for j in 0..n {
            let weight = f64::EPSILON * z[j].abs();
            if weight > 0.0 {
                for i in 0..n {
                    floors[i] += jac[(i, j)].abs() * weight;
                }
            }
        }
        residual_scales(z.as_slice(), &mut scales);
        for i in 0..n {
            eff_scales[i] = scales[i] + ROUNDOFF_FLOOR_SAFETY * floors[i] / options.tolerance;
        }

        let norm = scaled_norm(&fg, &eff_scales);
        if !norm.is_finite() {
            return Err(NewtonStall {
                best_z,
                best_norm,
                reason: "residual norm is not finite".into(),
            });
        }
        if norm <= options.tolerance {
            return Ok(NewtonSuccess {
                z,
                iterations: iteration,
                residual_norm: norm,
            });
        }
        if norm < best_norm {
            best_norm = norm;
            best_z = z.clone();
        }

        // Equilibrate before factoring: rows span the residual scales and
        // columns the variable magnitudes, which differ by many orders of
        // magnitude between concentration, energy and pressure entries.
        let col_w: Vec<f64> = (0..n)
            .map(|j| z[j].abs().max(system.fd_floor(j)))
            .collect();
        let mut scaled = jac.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] = jac[(i, j)] * col_w[j] / eff_scales[i];
            }
        }
        let lu = scaled.lu();
        if !lu.is_invertible() {
            return Err(NewtonStall {
                best_z,
                best_norm,
                reason: "Jacobian is singular".into(),
            });
        }
        let rhs = DVector::from_iterator(n, fg.iter().zip(&eff_scales).map(|(&r, &s)| -r / s));
        let Some(mut delta) = lu.solve(&rhs) else {
            return Err(NewtonStall {
                best_z,
                best_norm,
                reason: "linear solve failed".into(),
            });
        };
        for (d, &w) in delta.iter_mut().zip(&col_w) {
            *d *= w;
        }

        // Backtrack until the scaled residual strictly decreases; the floor
        // part of the scales stays frozen over the search.
        let mut accepted = false;
        let mut lambda = 1.0;
        let mut smallest_lambda = lambda;
        for _ in 0..=options.max_halvings {
            smallest_lambda = lambda;
            let mut z_try = z.clone();
            z_try.axpy(lambda, &delta, 1.0);
            if eval_packed(system, 0.0, z_try.as_slice(), &mut fg, &muted).is_ok() {
                residual_scales(z_try.as_slice(), &mut scales);
                for i in 0..n {
                    eff_scales[i] =
                        scales[i] + ROUNDOFF_FLOOR_SAFETY * floors[i] / options.tolerance;
                }
                let norm_try = scaled_norm(&fg, &eff_scales);
                if norm_try < norm {
                    z = z_try;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            stalls += 1;
            if stalls >= options.max_stalls {
                return Err(NewtonStall {
                    best_z,
                    best_norm,
                    reason: "no damping factor reduced the residual".into(),
                });
            }
            // Take the shortest step anyway, to move off a flat spot.
            let mut z_try = z.clone();
            z_try.axpy(smallest_lambda, &delta, 1.0);
            if eval_packed(system, 0.0, z_try.as_slice(), &mut fg, &muted).is_err() {
                return Err(NewtonStall {
                    best_z,
                    best_norm,
                    reason: "forced step left the feasible region".into(),
                });
            }
            z = z_try;
        }
    }
    Err(NewtonStall {
        best_z,
        best_norm,
        reason: "iteration limit reached".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{dense_partition, EvalFailure};

    /// f = a - x with an algebraic mirror y = x.
    struct Offset {
        a: f64,
    }

    impl DaeSystem for Offset {
        fn n_differential(&self) -> usize {
            1
        }

        fn n_algebraic(&self) -> usize {
            1
        }

        fn eval(
            &self,
            _t: f64,
            x: &[f64],
            y: &[f64],
            f: &mut [f64],
            g: &mut [f64],
            _diag: &Diagnostics,
        ) -> Result<(), EvalFailure> {
            f[0] = self.a - x[0];
            g[0] = y[0] - x[0];
            Ok(())
        }
    }

    #[test]
    fn newton_solves_a_linear_root_in_one_step() {
        let system = Offset { a: 3.0 };
        let partition = dense_partition(2, 2);
        let options = NewtonOptions {
            max_iterations: 20,
            tolerance: 1e-10,
            max_halvings: 8,
            max_stalls: 2,
        };
        let scales = |_z: &[f64], out: &mut [f64]| out.fill(1.0);
        let result = damped_newton(
            &system,
            DVector::from_column_slice(&[0.0, 5.0]),
            &scales,
            &partition,
            &options,
        )
        .unwrap_or_else(|s| panic!("stalled: {}", s.reason));
        assert!((result.z[0] - 3.0).abs() < 1e-8);
        assert!((result.z[1] - 3.0).abs() < 1e-8);
        assert!(result.iterations <= 3);
    }

    #[test]
    fn converged_input_returns_immediately() {
        let system = Offset { a: 3.0 };
        let partition = dense_partition(2, 2);
        let options = NewtonOptions {
            max_iterations: 20,
            tolerance: 1e-10,
            max_halvings: 8,
            max_stalls: 2,
        };
        let scales = |_z: &[f64], out: &mut [f64]| out.fill(1.0);
        let result = damped_newton(
            &system,
            DVector::from_column_slice(&[3.0, 3.0]),
            &scales,
            &partition,
            &options,
        )
        .unwrap_or_else(|s| panic!("stalled: {}", s.reason));
        assert_eq!(result.iterations, 0);
    }

    /// A root that sits between representable values: the slope is so steep
    /// that the residual at the nearest representable state (about 8e-8)
    /// exceeds the plain tolerance. The attainability floor must accept that
    /// state instead of stalling.
    struct SteepOffset;

    impl DaeSystem for SteepOffset {
        fn n_differential(&self) -> usize {
            1
        }

        fn n_algebraic(&self) -> usize {
            0
        }

        fn eval(
            &self,
            _t: f64,
            x: &[f64],
            _y: &[f64],
            f: &mut [f64],
            _g: &mut [f64],
            _diag: &Diagnostics,
        ) -> Result<(), EvalFailure> {
            // Root at 1/3, which no double represents exactly.
            f[0] = 3.0e9 * x[0] - 1.0e9;
            Ok(())
        }
    }

    #[test]
    fn sub_ulp_root_converges_via_attainability_floor() {
        let system = SteepOffset;
        let partition = dense_partition(1, 1);
        let options = NewtonOptions {
            max_iterations: 20,
            tolerance: 1e-8,
            max_halvings: 8,
            max_stalls: 2,
        };
        let scales = |_z: &[f64], out: &mut [f64]| out.fill(1.0);
        let result = damped_newton(
            &system,
            DVector::from_column_slice(&[0.3339]),
            &scales,
            &partition,
            &options,
        )
        .unwrap_or_else(|s| panic!("stalled: {}", s.reason));
        // Within an ulp of the exact root.
        assert!((result.z[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(result.iterations <= 3);
    }
}
