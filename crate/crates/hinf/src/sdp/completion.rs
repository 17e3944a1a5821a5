//! Positive-semidefinite matrix completion for the bordered 3x3 block
//! pattern used by the axis-zero reduction.
//!
//! Given PSD `[[U11, U31'], [U31, U33]]` and `[[U22, U32'], [U32, U33]]`
//! sharing the corner `U33`, the completion `U21 = U32' pinv(U33) U31`
//! makes the full matrix
//!
//! ```text
//! [ U11   U21'  U31' ]
//! [ U21   U22   U32' ]
//! [ U31   U32   U33  ]
//! ```
//!
//! PSD: with that choice, the Schur complement with respect to `U33`
//! block-diagonalizes into the two hypothesis complements.

use nalgebra::DMatrix;

use crate::config::Tolerances;
use crate::error::{HinfError, Result};

/// Completes `U21`; errors when the bordered hypothesis blocks are not
/// PSD within tolerance.
pub fn matrix_completion(
    u11: &DMatrix<f64>,
    u31: &DMatrix<f64>,
    u22: &DMatrix<f64>,
    u32: &DMatrix<f64>,
    u33: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let k = u11.nrows();
    let l = u22.nrows();
    let r = u33.nrows();
    if u31.nrows() != r || u31.ncols() != k || u32.nrows() != r || u32.ncols() != l {
        return Err(HinfError::Dimension("completion borders".to_string()));
    }
    let bordered = |diag: &DMatrix<f64>, border: &DMatrix<f64>| -> DMatrix<f64> {
        let d = diag.nrows();
        let mut m = DMatrix::zeros(d + r, d + r);
        m.view_mut((0, 0), (d, d)).copy_from(diag);
        m.view_mut((d, 0), (r, d)).copy_from(border);
        m.view_mut((0, d), (d, r)).copy_from(&border.transpose());
        m.view_mut((d, d), (r, r)).copy_from(u33);
        m
    };
    for (name, m) in [
        ("first bordered block", bordered(u11, u31)),
        ("second bordered block", bordered(u22, u32)),
    ] {
        let lam = m.clone().symmetric_eigen().eigenvalues.min();
        let floor = -1e-9 * m.trace().abs().max(1.0);
        if lam < floor {
            return Err(HinfError::HypothesisViolated(format!(
                "{name} has eigenvalue {lam:.3e}"
            )));
        }
    }
    // Pseudo-inverse of the shared corner.
    let eig = u33.clone().symmetric_eigen();
    let tau = tol.tau_rank(r, eig.eigenvalues.amax());
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        *v = if *v > tau { 1.0 / *v } else { 0.0 };
    }
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok(u32.transpose() * pinv * u31)
}

/// Assembles the completed matrix, mainly for verification.
pub fn completed_matrix(
    u11: &DMatrix<f64>,
    u21: &DMatrix<f64>,
    u31: &DMatrix<f64>,
    u22: &DMatrix<f64>,
    u32: &DMatrix<f64>,
    u33: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = u11.nrows();
    let l = u22.nrows();
    let r = u33.nrows();
    let dim = k + l + r;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (k, k)).copy_from(u11);
    m.view_mut((k, 0), (l, k)).copy_from(u21);
    m.view_mut((0, k), (k, l)).copy_from(&u21.transpose());
    m.view_mut((k, k), (l, l)).copy_from(u22);
    m.view_mut((k + l, 0), (r, k)).copy_from(u31);
    m.view_mut((0, k + l), (k, r)).copy_from(&u31.transpose());
    m.view_mut((k + l, k), (r, l)).copy_from(u32);
    m.view_mut((k, k + l), (l, r)).copy_from(&u32.transpose());
    m.view_mut((k + l, k + l), (r, r)).copy_from(u33);
    m
}
