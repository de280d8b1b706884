//! Finite-difference Jacobians of the packed residual `[f; g]` with respect
//! to the packed state `[x; y]`.
//!
//! Columns are probed in groups: all columns of a group are perturbed at
//! once and a single residual evaluation serves them all, which is exact as
//! long as no two columns of a group touch a common residual row. Each
//! column lists the rows it can influence; only those entries are read from
//! the perturbed residual, so a valid grouping yields the same matrix as
//! one-column-at-a-time probing, bit for bit.

use nalgebra::DMatrix;

use super::{eval_packed, DaeSystem, EvalFailure};
use crate::diag::Diagnostics;

/// One probed column and the residual rows it can influence.
#[derive(Debug, Clone)]
pub struct FdColumn {
    pub column: usize,
    pub rows: Vec<usize>,
}

/// Groups of columns that can share a perturbed residual evaluation.
pub type FdPartition = Vec<Vec<FdColumn>>;

/// The trivial partition: every column alone, influencing every row.
pub fn dense_partition(n_cols: usize, n_rows: usize) -> FdPartition {
    (0..n_cols)
        .map(|column| {
            vec![FdColumn {
                column,
                rows: (0..n_rows).collect(),
            }]
        })
        .collect()
}

/// Reusable buffers for Jacobian evaluation.
#[derive(Debug, Default)]
pub struct FdScratch {
    base: Vec<f64>,
    perturbed: Vec<f64>,
    z_work: Vec<f64>,
}

impl FdScratch {
    pub fn new(n: usize) -> Self {
        FdScratch {
            base: vec![0.0; n],
            perturbed: vec![0.0; n],
            z_work: vec![0.0; n],
        }
    }
}

/// Fills `jac` with the finite-difference Jacobian of the packed residual at
/// `z`. Entries outside the partition's row lists are structural zeros.
/// Returns the number of residual evaluations spent.
pub fn system_jacobian(
    system: &dyn DaeSystem,
    t: f64,
    z: &[f64],
    partition: &FdPartition,
    jac: &mut DMatrix<f64>,
    scratch: &mut FdScratch,
) -> Result<usize, EvalFailure> {
    let n = system.n_total();
    debug_assert_eq!(z.len(), n);
    debug_assert_eq!(jac.nrows(), n);
    debug_assert_eq!(jac.ncols(), n);

    let muted = Diagnostics::muted();
    eval_packed(system, t, z, &mut scratch.base, &muted)?;
    let mut evals = 1;

    jac.fill(0.0);
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut deltas: Vec<f64> = Vec::new();
    for group in partition {
        scratch.z_work.copy_from_slice(z);
        deltas.clear();
        for col in group {
            let j = col.column;
            let delta = sqrt_eps * z[j].abs().max(system.fd_floor(j));
            scratch.z_work[j] = z[j] + delta;
            // Use the perturbation that survived rounding.
            deltas.push(scratch.z_work[j] - z[j]);
        }
        eval_packed(system, t, &scratch.z_work, &mut scratch.perturbed, &muted)?;
        evals += 1;
        for (col, &delta) in group.iter().zip(&deltas) {
            for &row in &col.rows {
                jac[(row, col.column)] = (scratch.perturbed[row] - scratch.base[row]) / delta;
            }
        }
    }
    Ok(evals)
}
