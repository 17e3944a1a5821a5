//! LMI assembly: the full feasibility problem, its invariant-zero
//! reductions, and the dual problems with their facial reductions.
//!
//! The full problem, with `X`, `Y` symmetric and `gamma` scalar, is
//!
//! ```text
//! inf gamma  s.t.
//!   -P1' [ He(AX)  Xc1  b1 ; c1'X  -g  d11 ; b1'  d11  -g ] P1  PSD
//!   -P2' [ He(YA)  Yb1  c1 ; b1'Y  -g  d11 ; c1'  d11  -g ] P2  PSD
//!   [ X  -I ; -I  Y ]                                          PSD
//! ```
//!
//! where `P1`, `P2` are perpendicular matrices of `(b2; d12; 0)` and
//! `(c2; d21; 0)`. Choosing the null-vector perpendicular turns the
//! constraints into the zero-structured form that the reductions exploit;
//! any full-column-rank perpendicular gives the same optimal value.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{HinfError, Result};
use crate::plant::StateSpacePlant;
use crate::sdp::problem::{LmiProblem, SdpProblem, Sense};
use crate::zeros::{RealBlock, ZeroData};

/// How to build the perpendicular matrices of the full LMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerpKind {
    /// Null-vector construction from invariant-zero data.
    NullVector,
    /// Householder basis of the orthogonal complement (independent of the
    /// zero machinery; used by the bisection oracle).
    Orthonormal,
}

/// Symmetric-matrix variable layout: normalized basis over `i <= j`.
#[derive(Debug, Clone, Copy)]
pub struct SymVar {
    pub dim: usize,
}

impl SymVar {
    pub fn count(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// k-th basis matrix (unit Frobenius norm).
    pub fn basis(&self, k: usize) -> DMatrix<f64> {
        let (i, j) = self.index(k);
        let mut b = DMatrix::zeros(self.dim, self.dim);
        if i == j {
            b[(i, i)] = 1.0;
        } else {
            let v = 0.5_f64.sqrt();
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
        b
    }

    pub fn index(&self, mut k: usize) -> (usize, usize) {
        for i in 0..self.dim {
            let row = self.dim - i;
            if k < row {
                return (i, i + k);
            }
            k -= row;
        }
        panic!("symmetric index out of range");
    }
}

/// Coefficient matrix `K` with `tr(K Ztilde) = He(Phi Ztilde Psi')_{pq}`
/// for symmetric `Ztilde`.
pub fn he_row_coeff(phi: &DMatrix<f64>, psi: &DMatrix<f64>, p: usize, q: usize) -> DMatrix<f64> {
    let phi_p = phi.row(p).transpose();
    let phi_q = phi.row(q).transpose();
    let psi_p = psi.row(p).transpose();
    let psi_q = psi.row(q).transpose();
    let m = &psi_q * phi_p.transpose() + &phi_q * psi_p.transpose();
    (&m + m.transpose()) * 0.5
}

/// Perpendicular matrix of `(b; d; 0)` in `R^{n+2}`.
pub fn perp_matrix(
    b: &DVector<f64>,
    d: f64,
    kind: PerpKind,
    zd: &ZeroData,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let n = b.len();
    match kind {
        PerpKind::Orthonormal => {
            let mut v = DVector::zeros(n + 2);
            for i in 0..n {
                v[i] = b[i];
            }
            v[n] = d;
            Ok(householder_complement(&v))
        }
        PerpKind::NullVector => {
            let stacked = zd.stacked();
            let inf = &zd.infinite;
            let cols = stacked.dim() + inf.p_mat.ncols() + 1;
            if cols != n + 1 {
                return Err(HinfError::DegenerateChannel(format!(
                    "perpendicular has {cols} columns, expected {}",
                    n + 1
                )));
            }
            let mut perp = DMatrix::zeros(n + 2, n + 1);
            let k = stacked.dim();
            perp.view_mut((0, 0), (n, k)).copy_from(&stacked.s);
            for j in 0..k {
                perp[(n, j)] = stacked.f[j];
            }
            let r = inf.p_mat.ncols();
            perp.view_mut((0, k), (n, r)).copy_from(&inf.p_mat);
            for j in 0..r {
                perp[(n, k + j)] = inf.p_vec[j];
            }
            perp[(n + 1, n)] = 1.0;
            // Sanity: orthogonality and conditioning.
            let mut v = DVector::zeros(n + 2);
            for i in 0..n {
                v[i] = b[i];
            }
            v[n] = d;
            let ortho = (perp.transpose() * &v).norm();
            if ortho > 1e-6 * v.norm().max(1.0) * perp.norm() {
                return Err(HinfError::DegenerateChannel(format!(
                    "null-vector perpendicular residual {ortho:.3e}"
                )));
            }
            let sv = perp.clone().svd(false, false).singular_values;
            if sv.min() <= tol.tau_rank(n + 2, sv.max()) {
                return Err(HinfError::DegenerateChannel(
                    "null-vector perpendicular nearly rank-deficient".to_string(),
                ));
            }
            Ok(perp)
        }
    }
}

/// Orthonormal basis of the complement of `v` (columns).
fn householder_complement(v: &DVector<f64>) -> DMatrix<f64> {
    let k = v.len();
    let norm = v.norm();
    if norm == 0.0 {
        return DMatrix::identity(k, k);
    }
    let mut w = v.clone();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign * norm;
    let wn2 = w.norm_squared();
    let h = DMatrix::identity(k, k) - (&w * w.transpose()) * (2.0 / wn2);
    // First column of H is parallel to v; the rest span its complement.
    h.columns(1, k - 1).into_owned()
}

/// Gamma-parametric full LMI. `base` holds the constant and variable
/// parts without gamma; `gamma_coeff` is the per-block coefficient of
/// gamma (so a block reads `sum_y y L - (l0 - gamma * coeff)`).
#[derive(Debug, Clone)]
pub struct GammaLmi {
    pub base: LmiProblem,
    pub gamma_coeff: Vec<DMatrix<f64>>,
}

impl GammaLmi {
    /// Feasibility problem at fixed gamma (no objective).
    pub fn feasibility_at(&self, gamma: f64) -> LmiProblem {
        let mut p = self.base.clone();
        for (i, l0) in p.l0.iter_mut().enumerate() {
            *l0 -= &self.gamma_coeff[i] * gamma;
        }
        p
    }

    /// Minimization form with gamma appended as the last variable.
    pub fn min_gamma(&self) -> LmiProblem {
        let mut p = self.base.clone();
        p.coeff.push(self.gamma_coeff.clone());
        let m = p.d.len();
        let mut d = DVector::zeros(m + 1);
        d[m] = 1.0;
        p.d = d;
        p
    }
}

/// Full-size LMI of the output-feedback problem.
pub fn assemble_lmi_full(
    plant: &StateSpacePlant,
    zd_zu: &ZeroData,
    zd_yw: &ZeroData,
    kind: PerpKind,
    tol: &Tolerances,
) -> Result<GammaLmi> {
    let n = plant.n;
    let perp1 = perp_matrix(&plant.b2, plant.d12, kind, zd_zu, tol)?;
    let perp2 = perp_matrix(&plant.c2, plant.d21, kind, zd_yw, tol)?;

    let xv = SymVar { dim: n };
    let nx = xv.count();
    let mut coeff: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(2 * nx);
    // An identically-zero channel direction has a square perpendicular;
    // size the blocks from the matrices actually used.
    let dims = vec![perp1.ncols(), perp2.ncols(), 2 * n];

    let project = |perp: &DMatrix<f64>, inner: &DMatrix<f64>| -> DMatrix<f64> {
        perp.transpose() * inner * perp
    };

    // X variables.
    for k in 0..nx {
        let bmat = xv.basis(k);
        let mut inner = DMatrix::zeros(n + 2, n + 2);
        let he = &plant.a * &bmat + &bmat * plant.a.transpose();
        inner.view_mut((0, 0), (n, n)).copy_from(&he);
        let bc = &bmat * &plant.c1;
        for i in 0..n {
            inner[(i, n)] = bc[i];
            inner[(n, i)] = bc[i];
        }
        let block1 = -project(&perp1, &inner);
        let mut block3 = DMatrix::zeros(2 * n, 2 * n);
        block3.view_mut((0, 0), (n, n)).copy_from(&bmat);
        coeff.push(vec![block1, DMatrix::zeros(perp2.ncols(), perp2.ncols()), block3]);
    }
    // Y variables.
    for k in 0..nx {
        let bmat = xv.basis(k);
        let mut inner = DMatrix::zeros(n + 2, n + 2);
        let he = &bmat * &plant.a + plant.a.transpose() * &bmat;
        inner.view_mut((0, 0), (n, n)).copy_from(&he);
        let bb = &bmat * &plant.b1;
        for i in 0..n {
            inner[(i, n)] = bb[i];
            inner[(n, i)] = bb[i];
        }
        let block2 = -project(&perp2, &inner);
        let mut block3 = DMatrix::zeros(2 * n, 2 * n);
        block3.view_mut((n, n), (n, n)).copy_from(&bmat);
        coeff.push(vec![DMatrix::zeros(perp1.ncols(), perp1.ncols()), block2, block3]);
    }

    // Constant parts.
    let mut const1 = DMatrix::zeros(n + 2, n + 2);
    for i in 0..n {
        const1[(i, n + 1)] = plant.b1[i];
        const1[(n + 1, i)] = plant.b1[i];
    }
    const1[(n, n + 1)] = plant.d11;
    const1[(n + 1, n)] = plant.d11;
    let mut const2 = DMatrix::zeros(n + 2, n + 2);
    for i in 0..n {
        const2[(i, n + 1)] = plant.c1[i];
        const2[(n + 1, i)] = plant.c1[i];
    }
    const2[(n, n + 1)] = plant.d11;
    const2[(n + 1, n)] = plant.d11;
    let mut l0_3 = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        l0_3[(i, n + i)] = 1.0;
        l0_3[(n + i, i)] = 1.0;
    }
    let l0 = vec![project(&perp1, &const1), project(&perp2, &const2), l0_3];

    // Gamma coefficient: +perp' diag(0_n, 1, 1) perp on blocks 1 and 2.
    let mut gsel = DMatrix::zeros(n + 2, n + 2);
    gsel[(n, n)] = 1.0;
    gsel[(n + 1, n + 1)] = 1.0;
    let gamma_coeff = vec![
        project(&perp1, &gsel),
        project(&perp2, &gsel),
        DMatrix::zeros(2 * n, 2 * n),
    ];

    Ok(GammaLmi {
        base: LmiProblem {
            block_dims: dims,
            l0,
            coeff,
            d: DVector::zeros(2 * nx),
        },
        gamma_coeff,
    })
}

/// How far to reduce the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionLevel {
    /// Axis zeros to scalar side constraints, infinite directions dropped;
    /// stable and unstable finite zeros kept (the mid-size core).
    AxisInfinite,
    /// Additionally drop stable zero blocks (the fully reduced core).
    Full,
}

/// Reduced LMI in minimization form: variables `(Xhat, Yhat, gamma)`.
///
/// Blocks: the two bordered channel blocks, the coupling block, one 2x2
/// block per axis zero, and the feedthrough 2x2 block when `d12 d21 = 0`.
pub fn assemble_reduced(
    plant: &StateSpacePlant,
    zd_zu: &ZeroData,
    zd_yw: &ZeroData,
    level: ReductionLevel,
) -> Result<GammaLmi> {
    let pick = |zd: &ZeroData| -> RealBlock {
        match level {
            ReductionLevel::AxisInfinite => zd.stacked_offaxis(),
            ReductionLevel::Full => zd.unstable.clone(),
        }
    };
    let s_blk = pick(zd_zu);
    let t_blk = pick(zd_yw);
    let (a1, a2) = (s_blk.dim(), t_blk.dim());
    let h1 = s_blk.s.transpose() * &plant.b1 + &s_blk.f * plant.d11;
    let h2 = t_blk.s.transpose() * &plant.c1 + &t_blk.f * plant.d11;
    let j = t_blk.s.transpose() * &s_blk.s;

    let case4 = plant.d12 == 0.0 || plant.d21 == 0.0;
    let mut dims = vec![a1 + 1, a2 + 1, a1 + a2];
    let axis_count = zd_zu.m_imag() + zd_yw.m_imag();
    for _ in 0..axis_count {
        dims.push(2);
    }
    if case4 {
        dims.push(2);
    }

    let xv = SymVar { dim: a1 };
    let yv = SymVar { dim: a2 };
    let mut coeff: Vec<Vec<DMatrix<f64>>> = Vec::new();
    let zero_blocks =
        |dims: &[usize]| -> Vec<DMatrix<f64>> { dims.iter().map(|&d| DMatrix::zeros(d, d)).collect() };

    for k in 0..xv.count() {
        let bmat = xv.basis(k);
        let mut blocks = zero_blocks(&dims);
        let he = s_blk.lambda.transpose() * &bmat + &bmat * &s_blk.lambda;
        blocks[0].view_mut((0, 0), (a1, a1)).copy_from(&(-he));
        blocks[2].view_mut((0, 0), (a1, a1)).copy_from(&bmat);
        coeff.push(blocks);
    }
    for k in 0..yv.count() {
        let bmat = yv.basis(k);
        let mut blocks = zero_blocks(&dims);
        let he = t_blk.lambda.transpose() * &bmat + &bmat * &t_blk.lambda;
        blocks[1].view_mut((0, 0), (a2, a2)).copy_from(&(-he));
        blocks[2].view_mut((a1, a1), (a2, a2)).copy_from(&bmat);
        coeff.push(blocks);
    }

    let mut l0 = zero_blocks(&dims);
    for i in 0..a1 {
        l0[0][(i, a1)] = h1[i];
        l0[0][(a1, i)] = h1[i];
    }
    for i in 0..a2 {
        l0[1][(i, a2)] = h2[i];
        l0[1][(a2, i)] = h2[i];
    }
    l0[2].view_mut((0, a1), (a1, a2)).copy_from(&j.transpose());
    l0[2].view_mut((a1, 0), (a2, a1)).copy_from(&j);

    let mut gamma_coeff = zero_blocks(&dims);
    gamma_coeff[0]
        .view_mut((0, 0), (a1, a1))
        .copy_from(&(&s_blk.f * s_blk.f.transpose()));
    gamma_coeff[0][(a1, a1)] = 1.0;
    gamma_coeff[1]
        .view_mut((0, 0), (a2, a2))
        .copy_from(&(&t_blk.f * t_blk.f.transpose()));
    gamma_coeff[1][(a2, a2)] = 1.0;

    let mut at = 3;
    for (pairs, rhs) in [(&zd_zu.imag_pairs, &plant.b1), (&zd_yw.imag_pairs, &plant.c1)] {
        for pair in pairs.iter() {
            let mut dot = num_complex::Complex64::new(0.0, 0.0);
            for i in 0..rhs.len() {
                dot += pair.s[i] * rhs[i];
            }
            let h_abs = (dot + pair.f * plant.d11).norm();
            let f_sq = pair.f.norm_sqr();
            gamma_coeff[at][(0, 0)] = f_sq;
            gamma_coeff[at][(1, 1)] = 1.0;
            l0[at][(0, 1)] = -h_abs;
            l0[at][(1, 0)] = -h_abs;
            at += 1;
        }
    }
    if case4 {
        gamma_coeff[at][(0, 0)] = 1.0;
        gamma_coeff[at][(1, 1)] = 1.0;
        l0[at][(0, 1)] = plant.d11;
        l0[at][(1, 0)] = plant.d11;
    }

    let nvars = coeff.len();
    Ok(GammaLmi {
        base: LmiProblem {
            block_dims: dims,
            l0,
            coeff,
            d: DVector::zeros(nvars),
        },
        gamma_coeff,
    })
}

impl GammaLmi {
    /// Mechanical conic dual of the minimization form:
    /// `max sum L0_i . Xi_i` s.t. `sum_i L_{ji} . Xi_i = d_j`, blocks PSD.
    /// Used to cross-check the structured dual assemblies.
    pub fn generic_dual(&self) -> SdpProblem {
        let lmi = self.min_gamma();
        let mut p = SdpProblem::new(lmi.block_dims.clone(), Sense::Max);
        p.objective = lmi.l0.clone();
        for j in 0..lmi.n_vars() {
            let mut row = p.zero_row();
            row.mats = lmi.coeff[j].clone();
            row.rhs = lmi.d[j];
            p.constraints.push(row);
        }
        p
    }
}


/// Adds the symmetric-entry extractor for `(p, q)` into `m` so that
/// `tr(m X) = X_{pq}` for symmetric `X`.
fn add_entry_extractor(m: &mut DMatrix<f64>, p: usize, q: usize) {
    if p == q {
        m[(p, p)] += 1.0;
    } else {
        m[(p, q)] += 0.5;
        m[(q, p)] += 0.5;
    }
}

/// Which dual family an assembly belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualKind {
    /// Both feedthroughs nonzero (covers the stable-zero and axis-zero
    /// families; the axis structure shows up in the solution pattern).
    Biproper,
    /// A vanishing feedthrough: infinite-zero directions present.
    Singular,
}

/// Dual of the reduced LMI in its unreduced block form.
///
/// Variables `Z`, `V` (size `n+1`) and `W` (size `2n`), maximizing the
/// coupling functional under the normalization row and the Lyapunov-type
/// block identities.
pub fn assemble_dual(
    plant: &StateSpacePlant,
    zd_zu: &ZeroData,
    zd_yw: &ZeroData,
    kind: DualKind,
) -> Result<SdpProblem> {
    let n = plant.n;
    let mut p = SdpProblem::new(vec![n + 1, n + 1, 2 * n], Sense::Max);

    // Channel data: (Phi, Psi) so that W11 = He(Phi Ztilde Psi') with
    // Ztilde the leading n x n block of Z, plus the border vector of the
    // objective and the normalization weight vector.
    let channel = |zd: &ZeroData,
                   rhs: &DVector<f64>|
     -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>)> {
        let stacked = zd.stacked();
        match kind {
            DualKind::Biproper => {
                if stacked.dim() != n {
                    return Err(HinfError::DegenerateChannel(
                        "biproper dual needs a square null-vector basis".to_string(),
                    ));
                }
                // Z-variable lives in hatted coordinates: W11 = He(Lambda Z11).
                let phi = stacked.lambda.clone();
                let psi = DMatrix::identity(n, n);
                let h = stacked.s.transpose() * rhs + &stacked.f * plant.d11;
                let w = stacked.f.clone();
                Ok((phi, psi, h, w))
            }
            DualKind::Singular => {
                let k = stacked.dim();
                let r = zd.infinite.p_mat.ncols();
                if k + r != n {
                    return Err(HinfError::DegenerateChannel(
                        "zero count mismatch in singular dual".to_string(),
                    ));
                }
                // Phi = [S Lambda, Phat], Psi = [S, P].
                let mut phi = DMatrix::zeros(n, n);
                phi.view_mut((0, 0), (n, k))
                    .copy_from(&(&stacked.s * &stacked.lambda));
                phi.view_mut((0, k), (n, r)).copy_from(&zd.infinite.p_hat);
                let mut psi = DMatrix::zeros(n, n);
                psi.view_mut((0, 0), (n, k)).copy_from(&stacked.s);
                psi.view_mut((0, k), (n, r)).copy_from(&zd.infinite.p_mat);
                let mut h = DVector::zeros(n);
                let h_fin = stacked.s.transpose() * rhs + &stacked.f * plant.d11;
                h.rows_mut(0, k).copy_from(&h_fin);
                let h_inf = zd.infinite.p_mat.transpose() * rhs + &zd.infinite.p_vec * plant.d11;
                h.rows_mut(k, r).copy_from(&h_inf);
                let mut w = DVector::zeros(n);
                w.rows_mut(0, k).copy_from(&stacked.f);
                w.rows_mut(k, r).copy_from(&zd.infinite.p_vec);
                Ok((phi, psi, h, w))
            }
        }
    };

    let (phi1, psi1, h1, w1) = channel(zd_zu, &plant.b1)?;
    let (phi2, psi2, h2, w2) = channel(zd_yw, &plant.c1)?;

    // Objective.
    for i in 0..n {
        p.objective[0][(i, n)] = h1[i];
        p.objective[0][(n, i)] = h1[i];
        p.objective[1][(i, n)] = h2[i];
        p.objective[1][(n, i)] = h2[i];
    }
    // Coupling weight on W: J = T' S in hatted coordinates, identity in
    // original coordinates.
    let (jw_t, jw) = match kind {
        DualKind::Biproper => {
            let s = zd_zu.stacked();
            let t = zd_yw.stacked();
            let j = t.s.transpose() * &s.s;
            (j.transpose(), j)
        }
        DualKind::Singular => (DMatrix::identity(n, n), DMatrix::identity(n, n)),
    };
    p.objective[2].view_mut((0, n), (n, n)).copy_from(&jw_t);
    p.objective[2].view_mut((n, 0), (n, n)).copy_from(&jw);

    // Normalization row.
    let mut row = p.zero_row();
    row.mats[0]
        .view_mut((0, 0), (n, n))
        .copy_from(&(&w1 * w1.transpose()));
    row.mats[0][(n, n)] = 1.0;
    row.mats[1]
        .view_mut((0, 0), (n, n))
        .copy_from(&(&w2 * w2.transpose()));
    row.mats[1][(n, n)] = 1.0;
    row.rhs = 1.0;
    p.constraints.push(row);

    // W11 = He(Phi1 Ztilde Psi1'), W22 = He(Phi2 Vtilde Psi2').
    for (which, phi, psi) in [(0usize, &phi1, &psi1), (1usize, &phi2, &psi2)] {
        for pi in 0..n {
            for qi in pi..n {
                let mut row = p.zero_row();
                // Extract W entry.
                let (wo_r, wo_c) = if which == 0 { (pi, qi) } else { (n + pi, n + qi) };
                add_entry_extractor(&mut row.mats[2], wo_r, wo_c);
                // Minus the He product of the Z/V block.
                let k = he_row_coeff(phi, psi, pi, qi);
                row.mats[which]
                    .view_mut((0, 0), (n, n))
                    .copy_from(&(-&k));
                row.rhs = 0.0;
                p.constraints.push(row);
            }
        }
    }
    Ok(p)
}

/// Which structural elimination a facial reduction used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ReductionStep {
    StableBlocks,
    AxisDiagonal,
    InfiniteDirections,
}

/// Record of one facial-reduction pass.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReductionReport {
    pub steps: Vec<ReductionStep>,
    pub pattern: String,
    pub dims_before: Vec<usize>,
    pub dims_after: Vec<usize>,
}

/// Facially reduced dual, built structurally from the zero data.
///
/// The zero structure forces every feasible dual point onto a face:
/// stable-zero rows vanish, axis rows collapse to paired diagonal
/// scalars, infinite-zero rows keep only the leading chain entry. The
/// problem on that face is exactly the conic dual of the fully reduced
/// LMI, so it is assembled that way; the report records which
/// eliminations the zero structure invoked.
pub fn facial_reduce_dual(
    plant: &StateSpacePlant,
    zd_zu: &ZeroData,
    zd_yw: &ZeroData,
    kind: DualKind,
) -> Result<(SdpProblem, ReductionReport)> {
    let n = plant.n;
    let reduced = assemble_reduced(plant, zd_zu, zd_yw, ReductionLevel::Full)?;
    let dual = reduced.generic_dual();
    let mut steps = Vec::new();
    let mut notes = Vec::new();
    if zd_zu.k_stable() + zd_yw.k_stable() > 0 {
        steps.push(ReductionStep::StableBlocks);
        notes.push(format!(
            "dropped {}+{} stable zero rows",
            zd_zu.k_stable(),
            zd_yw.k_stable()
        ));
    }
    if zd_zu.m_imag() + zd_yw.m_imag() > 0 {
        steps.push(ReductionStep::AxisDiagonal);
        notes.push(format!(
            "collapsed {}+{} axis pairs to paired diagonals",
            zd_zu.m_imag(),
            zd_yw.m_imag()
        ));
    }
    if matches!(kind, DualKind::Singular) {
        steps.push(ReductionStep::InfiniteDirections);
        notes.push(format!(
            "eliminated infinite-zero chains of length {} and {}",
            zd_zu.relative_degree, zd_yw.relative_degree
        ));
    }
    let report = ReductionReport {
        steps,
        pattern: notes.join("; "),
        dims_before: vec![n + 1, n + 1, 2 * n],
        dims_after: dual.block_dims.clone(),
    };
    Ok((dual, report))
}

/// Worst stable-block pattern violation of a solved biproper dual,
/// relative to the solution trace: everything in `Z11`, `V11`, `W`
/// outside the trailing unstable blocks must vanish, as must the leading
/// border rows.
pub fn stable_pattern_violation(
    z: &DMatrix<f64>,
    v: &DMatrix<f64>,
    w: &DMatrix<f64>,
    k1: usize,
    k2: usize,
) -> f64 {
    let n = z.nrows() - 1;
    let trace = z.trace() + v.trace() + w.trace();
    let scale = trace.max(1e-12);
    let mut worst: f64 = 0.0;
    let lead1 = n - k1;
    let lead2 = n - k2;
    worst = worst.max(z.view((0, 0), (lead1, lead1)).norm());
    worst = worst.max(z.view((lead1, 0), (k1, lead1)).norm());
    worst = worst.max(z.view((n, 0), (1, lead1)).norm());
    worst = worst.max(v.view((0, 0), (lead2, lead2)).norm());
    worst = worst.max(v.view((lead2, 0), (k2, lead2)).norm());
    worst = worst.max(v.view((n, 0), (1, lead2)).norm());
    // W11 leading block, W22 leading block, and their couplings.
    worst = worst.max(w.view((0, 0), (lead1, lead1)).norm());
    worst = worst.max(w.view((lead1, 0), (k1, lead1)).norm());
    worst = worst.max(w.view((n, 0), (n, lead1)).norm());
    worst = worst.max(w.view((n, n), (lead2, lead2)).norm());
    worst = worst.max(w.view((n + lead2, n), (k2, lead2)).norm());
    worst = worst.max(w.view((0, n), (n, lead2)).norm());
    worst / scale
}

/// Worst infinite-direction pattern violation of a solved singular dual:
/// the cross block between finite and infinite rows vanishes, and only
/// the leading chain entry of the infinite block survives.
pub fn infinite_pattern_violation(z: &DMatrix<f64>, v: &DMatrix<f64>, r1: usize, r2: usize) -> f64 {
    let n = z.nrows() - 1;
    let trace = z.trace() + v.trace();
    let scale = trace.max(1e-12);
    let mut worst: f64 = 0.0;
    for (m, r) in [(z, r1), (v, r2)] {
        if r == 0 {
            continue;
        }
        let k = n - r;
        worst = worst.max(m.view((k, 0), (r, k)).norm());
        for i in 0..r {
            for j in 0..r {
                if i == 0 && j == 0 {
                    continue;
                }
                worst = worst.max(m[(k + i, k + j)].abs());
            }
        }
        for i in 1..r {
            worst = worst.max(m[(n, k + i)].abs());
        }
    }
    worst / scale
}

/// Worst axis-block pattern violation of a solved biproper dual with
/// axis zeros stacked first: the axis part must be a paired diagonal,
/// decoupled from everything else.
pub fn axis_pattern_violation(z: &DMatrix<f64>, m_axis: usize) -> f64 {
    let n = z.nrows() - 1;
    let scale = z.trace().max(1e-12);
    let mut worst: f64 = 0.0;
    for p in 0..2 * m_axis {
        for q in 0..n {
            // Everything off the diagonal in the axis rows must vanish,
            // both within a pair and across; symmetric entries are
            // covered once.
            let paired = q < 2 * m_axis && (p / 2 == q / 2);
            if p != q && (paired || q >= p) {
                worst = worst.max(z[(p, q)].abs());
            }
        }
    }
    for j in 0..m_axis {
        worst = worst.max((z[(2 * j, 2 * j)] - z[(2 * j + 1, 2 * j + 1)]).abs());
    }
    worst / scale
}
