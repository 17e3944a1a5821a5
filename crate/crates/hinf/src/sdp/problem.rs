//! Problem containers for the dense SDP machinery.
//!
//! Two dual views of the same conic pair are used throughout:
//!
//! * [`SdpProblem`] — "primal" form: optimize a linear functional of
//!   symmetric matrix blocks under trace equality constraints, blocks PSD
//!   (plus optional free scalar variables);
//! * [`LmiProblem`] — "LMI" form: minimize `d'y` subject to
//!   `sum_j y_j L_{ij} - L_{i0}` PSD per block.
//!
//! The solver works on the pair at once, so either container can be
//! solved directly and both primal and dual iterates come back.

use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

use crate::error::{HinfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// One trace equality row `sum_i mats[i] . X_i + free . u = rhs`.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub mats: Vec<DMatrix<f64>>,
    pub free: DVector<f64>,
    pub rhs: f64,
}

/// Block-diagonal SDP in primal (trace-constrained) form.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: Vec<DMatrix<f64>>,
    pub free_objective: DVector<f64>,
    pub constraints: Vec<ConstraintRow>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, sense: Sense) -> Self {
        let objective = block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        Self {
            block_dims,
            objective,
            free_objective: DVector::zeros(0),
            constraints: Vec::new(),
            sense,
        }
    }

    pub fn free_dim(&self) -> usize {
        self.free_objective.len()
    }

    pub fn zero_row(&self) -> ConstraintRow {
        ConstraintRow {
            mats: self.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
            free: DVector::zeros(self.free_dim()),
            rhs: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.objective.iter().enumerate() {
            if c.nrows() != self.block_dims[i] || c.ncols() != self.block_dims[i] {
                return Err(HinfError::Dimension(format!("objective block {i}")));
            }
        }
        for (j, row) in self.constraints.iter().enumerate() {
            if row.mats.len() != self.block_dims.len() || row.free.len() != self.free_dim() {
                return Err(HinfError::Dimension(format!("constraint row {j}")));
            }
        }
        Ok(())
    }
}

/// LMI-form problem: `min d'y` s.t. `sum_j y_j coeff[j][i] - l0[i]` PSD.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub block_dims: Vec<usize>,
    pub l0: Vec<DMatrix<f64>>,
    /// `coeff[j][i]`: coefficient of variable `j` in block `i`.
    pub coeff: Vec<Vec<DMatrix<f64>>>,
    pub d: DVector<f64>,
}

impl LmiProblem {
    pub fn n_vars(&self) -> usize {
        self.coeff.len()
    }

    /// Adds a scalar variable `t` with block coefficients `-I`, turning
    /// every block constraint into `... - t I >= 0`; maximizing `t`
    /// probes strict feasibility. Returns the index of `t`.
    pub fn with_margin_variable(&self) -> (LmiProblem, usize) {
        let mut p = self.clone();
        let tvar: Vec<DMatrix<f64>> = p
            .block_dims
            .iter()
            .map(|&dim| -DMatrix::<f64>::identity(dim, dim))
            .collect();
        p.coeff.push(tvar);
        let mut d = DVector::zeros(p.d.len() + 1);
        d.rows_mut(0, p.d.len()).copy_from(&p.d);
        // d stays zero on the old objective when probing: the caller
        // decides; here we only maximize t.
        for v in d.iter_mut() {
            *v = 0.0;
        }
        d[p.d.len()] = -1.0; // min -t == max t
        p.d = d;
        let idx = p.coeff.len() - 1;
        (p, idx)
    }

    /// Adds box constraints `|y_j| <= r` as 1x1 blocks. The interior-point
    /// method behaves much better when the feasible set is compact; any
    /// `r` large enough to contain one positive-margin point leaves
    /// feasibility verdicts unchanged.
    pub fn with_box(&self, r: f64) -> LmiProblem {
        let mut p = self.clone();
        let m = self.n_vars();
        // Normalized form (1 +- y/r >= 0) keeps the box slacks on the
        // same scale as the main blocks.
        for j in 0..m {
            for sign in [1.0, -1.0] {
                p.block_dims.push(1);
                p.l0.push(DMatrix::from_element(1, 1, -1.0));
                for (jj, coeffs) in p.coeff.iter_mut().enumerate() {
                    let v = if jj == j { sign / r } else { 0.0 };
                    coeffs.push(DMatrix::from_element(1, 1, v));
                }
            }
        }
        p
    }

    /// Evaluates the slack blocks at `y`.
    pub fn slacks(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.block_dims
            .iter()
            .enumerate()
            .map(|(i, &dim)| {
                let mut s = -self.l0[i].clone();
                for j in 0..self.n_vars() {
                    s += &self.coeff[j][i] * y[j];
                }
                let _ = dim;
                s
            })
            .collect()
    }

    /// Serializes in the sparse SDPA text format
    /// (`min d'x` s.t. `sum x_i F_i - F_0` PSD).
    pub fn to_sdpa(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n_vars());
        let _ = writeln!(out, "{}", self.block_dims.len());
        let dims: Vec<String> = self.block_dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "{}", dims.join(" "));
        let obj: Vec<String> = self.d.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", obj.join(" "));
        let emit = |matno: usize, blocks: &[DMatrix<f64>], out: &mut String| {
            for (bi, m) in blocks.iter().enumerate() {
                for i in 0..m.nrows() {
                    for j in i..m.ncols() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            let _ = writeln!(out, "{matno} {} {} {} {v:.17e}", bi + 1, i + 1, j + 1);
                        }
                    }
                }
            }
        };
        emit(0, &self.l0, &mut out);
        for j in 0..self.n_vars() {
            emit(j + 1, &self.coeff[j], &mut out);
        }
        out
    }
}


impl SdpProblem {
    /// Adds `tr(X_i) + slack = r` rows with scalar slack blocks, bounding
    /// every matrix block. Harmless whenever some optimal solution has
    /// trace below `r`; it keeps the interior-point iterates compact on
    /// problems whose optimal face is unbounded.
    pub fn with_trace_caps(&self, r: f64) -> SdpProblem {
        let mut p = self.clone();
        let nb0 = p.block_dims.len();
        for i in 0..nb0 {
            if p.block_dims[i] == 0 {
                continue;
            }
            p.block_dims.push(1);
            for c in p.objective.iter_mut() {
                let _ = c;
            }
            p.objective.push(nalgebra::DMatrix::zeros(1, 1));
            for row in p.constraints.iter_mut() {
                row.mats.push(nalgebra::DMatrix::zeros(1, 1));
            }
            let mut row = ConstraintRow {
                mats: p
                    .block_dims
                    .iter()
                    .map(|&d| nalgebra::DMatrix::zeros(d, d))
                    .collect(),
                free: nalgebra::DVector::zeros(p.free_dim()),
                rhs: r,
            };
            row.mats[i] = nalgebra::DMatrix::identity(p.block_dims[i], p.block_dims[i]);
            let last = row.mats.len() - 1;
            row.mats[last] = nalgebra::DMatrix::identity(1, 1);
            p.constraints.push(row);
        }
        p
    }
}

/// Solver exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NearSingular,
}

/// Joint primal/dual solution of the conic pair.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Primal matrix blocks (the trace-constrained side).
    pub blocks: Vec<DMatrix<f64>>,
    pub free: DVector<f64>,
    /// Dual vector (the LMI side's variables).
    pub dual: DVector<f64>,
    /// Dual slack blocks.
    pub slacks: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_usable(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal)
    }
}
