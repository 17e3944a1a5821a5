//! Feasibility polish by alternating projections.
//!
//! Interior-point iterates on problems without a strictly feasible point
//! hover near, but not on, the feasible set; statements about "any
//! feasible solution" are better tested on a point that actually
//! satisfies the constraints. Alternating projections between the affine
//! span of the trace constraints and the PSD cones converge to such a
//! point from a nearby start.

use nalgebra::{DMatrix, DVector};

use crate::error::{HinfError, Result};
use crate::sdp::problem::SdpProblem;

/// Projects `start` toward the feasible set of `problem` (equality rows
/// plus PSD blocks). Returns the polished blocks and the final
/// feasibility measure `max(row residual, cone violation)`.
pub fn project_feasible(
    problem: &SdpProblem,
    start: &[DMatrix<f64>],
    max_iters: usize,
    target: f64,
) -> Result<(Vec<DMatrix<f64>>, f64)> {
    if problem.free_dim() != 0 {
        return Err(HinfError::Solver(
            "feasibility polish does not support free variables".to_string(),
        ));
    }
    let m = problem.constraints.len();
    let nb = problem.block_dims.len();
    // Gram matrix of the constraint rows.
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut v = 0.0;
            for b in 0..nb {
                v += problem.constraints[i].mats[b].dot(&problem.constraints[j].mats[b]);
            }
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let reg = 1e-13 * (1.0 + gram.trace() / m.max(1) as f64);
    let chol = (gram + DMatrix::identity(m, m) * reg)
        .cholesky()
        .ok_or_else(|| HinfError::Solver("constraint Gram not PD".to_string()))?;

    let mut x: Vec<DMatrix<f64>> = start.to_vec();
    let mut feas = f64::INFINITY;
    for _ in 0..max_iters {
        // Affine projection.
        let mut resid = DVector::zeros(m);
        for i in 0..m {
            let mut v = -problem.constraints[i].rhs;
            for b in 0..nb {
                v += problem.constraints[i].mats[b].dot(&x[b]);
            }
            resid[i] = v;
        }
        let mult = chol.solve(&resid);
        for b in 0..nb {
            for i in 0..m {
                if mult[i] != 0.0 {
                    x[b] -= &problem.constraints[i].mats[b] * mult[i];
                }
            }
        }
        // Cone projection.
        let mut cone_viol: f64 = 0.0;
        for b in 0..nb {
            if problem.block_dims[b] == 0 {
                continue;
            }
            let sym = (&x[b] + x[b].transpose()) * 0.5;
            let eig = sym.clone().symmetric_eigen();
            let min_eig = eig.eigenvalues.min();
            if min_eig < 0.0 {
                cone_viol = cone_viol.max(-min_eig);
                let mut vals = eig.eigenvalues.clone();
                for v in vals.iter_mut() {
                    *v = v.max(0.0);
                }
                x[b] = &eig.eigenvectors * DMatrix::from_diagonal(&vals)
                    * eig.eigenvectors.transpose();
            } else {
                x[b] = sym;
            }
        }
        // Feasibility after the cone step.
        let mut row_viol: f64 = 0.0;
        for i in 0..m {
            let mut v = -problem.constraints[i].rhs;
            for b in 0..nb {
                v += problem.constraints[i].mats[b].dot(&x[b]);
            }
            row_viol = row_viol.max(v.abs());
        }
        feas = row_viol.max(cone_viol);
        if feas <= target {
            break;
        }
    }
    Ok((x, feas))
}
