//! Strict-feasibility probe by margin maximization.
//!
//! For a trace-constrained problem the probe solves
//! `max t` s.t. `A(X~) + t A(I) = b`, `X~ PSD`, whose dual produces,
//! when `t* <= 0`, a certificate `y` with `A*(y) PSD` and `b'y = t*`:
//! exactly the alternative that drives facial reduction.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::sdp::problem::{LmiProblem, SdpProblem, SolveStatus};
use crate::sdp::solver::{lmi_solve, sdp_solve, SolveOptions};

/// Probe outcome. `margin` is the optimal `t*`.
#[derive(Debug, Clone)]
pub enum ProbeOutcome {
    StrictlyFeasible {
        margin: f64,
    },
    /// Not strictly feasible (within tolerance): the certificate blocks
    /// `A*(y)` annihilate every feasible point, exposing the face.
    ReducingDirectionFound {
        margin: f64,
        certificate: Vec<DMatrix<f64>>,
    },
    /// The margin solve did not reach a trustworthy answer.
    Inconclusive {
        margin: f64,
        status: SolveStatus,
    },
}

/// Probes a trace-constrained (primal-form) problem.
pub fn strict_feasibility_probe(
    problem: &SdpProblem,
    opts: &SolveOptions,
) -> Result<ProbeOutcome> {
    let mut probe = problem.clone();
    // Margin variable: X = X~ + t I shifts every constraint by t tr(A_ij).
    let m = probe.constraints.len();
    let p0 = probe.free_dim();
    for c in probe.objective.iter_mut() {
        c.fill(0.0);
    }
    let mut fobj = DVector::zeros(p0 + 1);
    fobj[p0] = 1.0;
    probe.free_objective = fobj;
    probe.sense = crate::sdp::problem::Sense::Max;
    for j in 0..m {
        let shift: f64 = probe.constraints[j].mats.iter().map(|a| a.trace()).sum();
        let old = probe.constraints[j].free.clone();
        let mut nf = DVector::zeros(p0 + 1);
        nf.rows_mut(0, p0).copy_from(&old);
        nf[p0] = shift;
        probe.constraints[j].free = nf;
    }
    let sol = sdp_solve(&probe, opts)?;
    let t = sol.free[p0];
    let scale = 1.0 + problem
        .constraints
        .iter()
        .map(|c| c.rhs.abs())
        .fold(0.0_f64, f64::max);
    let margin_tol = 1e-5 * scale;
    if !t.is_finite() {
        return Ok(ProbeOutcome::Inconclusive { margin: t, status: sol.status });
    }
    if t > margin_tol {
        Ok(ProbeOutcome::StrictlyFeasible { margin: t })
    } else {
        // Certificate from the probe's dual slacks: PSD by construction,
        // and for feasible X of the original, <certificate, X> equals the
        // (near-zero) margin, which is what pins X to a face.
        Ok(ProbeOutcome::ReducingDirectionFound {
            margin: t,
            certificate: sol.slacks,
        })
    }
}

/// Probes an LMI-form problem (`max t` s.t. blocks `>= t I`).
pub fn strict_feasibility_probe_lmi(
    problem: &LmiProblem,
    opts: &SolveOptions,
) -> Result<ProbeOutcome> {
    // Box the variables so an unbounded margin (strictly feasible in
    // every direction) still returns a finite positive value.
    let (probe, tidx) = problem.with_box(1e7).with_margin_variable();
    let sol = lmi_solve(&probe, opts)?;
    let t = sol.y[tidx];
    let margin_tol = 1e-5;
    if !t.is_finite() {
        return Ok(ProbeOutcome::Inconclusive { margin: t, status: sol.status });
    }
    if t > margin_tol {
        Ok(ProbeOutcome::StrictlyFeasible { margin: t })
    } else {
        Ok(ProbeOutcome::ReducingDirectionFound {
            margin: t,
            certificate: sol.certificate,
        })
    }
}
