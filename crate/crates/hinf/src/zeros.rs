//! Invariant zeros, null vectors and Weierstrass partition data.
//!
//! For a scalar realization `(A, b, c, d)` the invariant zeros are the
//! finite generalized eigenvalues of the pencil
//!
//! ```text
//! [ A - s I   b ]
//! [   c'      d ]
//! ```
//!
//! Together with each zero we extract left null vectors `(s; f)` with
//! `(s' f) [[A, b], [c', d]] = lambda (s' 0)`, generalized (chain) vectors
//! for repeated zeros, real two-row stackings for complex pairs, and the
//! polynomial basis spanning the infinite-zero directions. This data is
//! exactly what the downstream Gramian and LMI constructions consume.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{HinfError, Result};
use crate::plant::Realization;

/// Stability class of an invariant zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZeroClass {
    Stable,
    Unstable,
    Imaginary,
}

/// One invariant zero with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantZero {
    pub value: Complex64,
    pub multiplicity: usize,
    pub klass: ZeroClass,
}

/// Real null-vector block: columns of `s` and entries of `f` satisfy
/// `(S' f) M = Lambda' (S' 0)` for the Rosenbrock matrix `M`.
#[derive(Debug, Clone, Default)]
pub struct RealBlock {
    /// Block-diagonal real matrix (Jordan and rotation blocks).
    pub lambda: DMatrix<f64>,
    /// `n x k` matrix of state parts of the null vectors.
    pub s: DMatrix<f64>,
    /// Length-`k` vector of input parts.
    pub f: DVector<f64>,
}

impl RealBlock {
    pub fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn empty(n: usize) -> Self {
        Self {
            lambda: DMatrix::zeros(0, 0),
            s: DMatrix::zeros(n, 0),
            f: DVector::zeros(0),
        }
    }
}

/// Complex axis-zero pair `lambda = i w` (`w > 0`) with its complex null
/// vector; the conjugate pair is implicit.
#[derive(Debug, Clone)]
pub struct ImagPair {
    pub value: Complex64,
    pub s: DVector<Complex64>,
    pub f: Complex64,
    pub multiplicity: usize,
}

impl ImagPair {
    /// Real 2x2 block `[[0, w], [-w, 0]]` of the stacked real form.
    pub fn rotation(&self) -> DMatrix<f64> {
        let w = self.value.im;
        DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0])
    }
}

/// Basis of the infinite-zero directions: `P = [0, c, A'c, ...]`
/// (`n x r` columns) and `p = e_1` so that `(b; d; 0)`-perpendicular
/// matrices can be completed when `d = 0`.
#[derive(Debug, Clone)]
pub struct InfiniteBasis {
    pub p_mat: DMatrix<f64>,
    pub p_vec: DVector<f64>,
    /// Companion matrix `[c, A'c, ..., (A')^{r-1} c]` used by the singular
    /// LMI assembly.
    pub p_hat: DMatrix<f64>,
}

/// Full invariant-zero data of one realization.
#[derive(Debug, Clone)]
pub struct ZeroData {
    pub zeros: Vec<InvariantZero>,
    pub relative_degree: usize,
    pub stable: RealBlock,
    pub unstable: RealBlock,
    pub imag_pairs: Vec<ImagPair>,
    pub infinite: InfiniteBasis,
    /// Frobenius residual of the defining identity, relative to `||M||_F`.
    pub residual: f64,
    /// Condition number of the square stacked `S` when `d != 0`.
    pub s_condition: Option<f64>,
    n: usize,
}

impl ZeroData {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Placeholder for channels without usable zero structure (used by
    /// assemblies that do not consume the null-vector data).
    pub fn placeholder(n: usize) -> Self {
        Self {
            zeros: Vec::new(),
            relative_degree: 0,
            stable: RealBlock::empty(n),
            unstable: RealBlock::empty(n),
            imag_pairs: Vec::new(),
            infinite: InfiniteBasis {
                p_mat: DMatrix::zeros(n, 0),
                p_vec: DVector::zeros(0),
                p_hat: DMatrix::zeros(n, 0),
            },
            residual: 0.0,
            s_condition: None,
            n,
        }
    }

    /// Number of unstable zeros counted with multiplicity.
    pub fn k_unstable(&self) -> usize {
        self.unstable.dim()
    }

    pub fn k_stable(&self) -> usize {
        self.stable.dim()
    }

    /// Number of axis pairs (each contributes two zeros).
    pub fn m_imag(&self) -> usize {
        self.imag_pairs.len()
    }

    pub fn total_finite(&self) -> usize {
        self.stable.dim() + self.unstable.dim() + 2 * self.imag_pairs.len()
    }

    /// Real stacked axis block `(Lambda_0, S_0, f_0)` with two rows per
    /// pair (real and imaginary parts).
    pub fn imag_block(&self) -> RealBlock {
        let m = self.imag_pairs.len();
        let mut lambda = DMatrix::zeros(2 * m, 2 * m);
        let mut s = DMatrix::zeros(self.n, 2 * m);
        let mut f = DVector::zeros(2 * m);
        for (j, pair) in self.imag_pairs.iter().enumerate() {
            lambda
                .view_mut((2 * j, 2 * j), (2, 2))
                .copy_from(&pair.rotation());
            for i in 0..self.n {
                s[(i, 2 * j)] = pair.s[i].re;
                s[(i, 2 * j + 1)] = pair.s[i].im;
            }
            f[2 * j] = pair.f.re;
            f[2 * j + 1] = pair.f.im;
        }
        RealBlock { lambda, s, f }
    }

    /// All finite-zero data stacked in the order
    /// `[axis (real-stacked) | stable | unstable]`.
    pub fn stacked(&self) -> RealBlock {
        let blocks = [self.imag_block(), self.stable.clone(), self.unstable.clone()];
        let k: usize = blocks.iter().map(RealBlock::dim).sum();
        let mut lambda = DMatrix::zeros(k, k);
        let mut s = DMatrix::zeros(self.n, k);
        let mut f = DVector::zeros(k);
        let mut at = 0;
        for b in &blocks {
            let d = b.dim();
            lambda.view_mut((at, at), (d, d)).copy_from(&b.lambda);
            s.view_mut((0, at), (self.n, d)).copy_from(&b.s);
            f.rows_mut(at, d).copy_from(&b.f);
            at += d;
        }
        RealBlock { lambda, s, f }
    }

    /// Non-axis finite-zero data `[stable | unstable]`, the core left
    /// after eliminating axis and infinite directions.
    pub fn stacked_offaxis(&self) -> RealBlock {
        let blocks = [self.stable.clone(), self.unstable.clone()];
        let k: usize = blocks.iter().map(RealBlock::dim).sum();
        let mut lambda = DMatrix::zeros(k, k);
        let mut s = DMatrix::zeros(self.n, k);
        let mut f = DVector::zeros(k);
        let mut at = 0;
        for b in &blocks {
            let d = b.dim();
            lambda.view_mut((at, at), (d, d)).copy_from(&b.lambda);
            s.view_mut((0, at), (self.n, d)).copy_from(&b.s);
            f.rows_mut(at, d).copy_from(&b.f);
            at += d;
        }
        RealBlock { lambda, s, f }
    }
}

/// Rosenbrock system matrix `[[A, b], [c', d]]`.
pub fn rosenbrock(r: &Realization) -> DMatrix<f64> {
    let n = r.order();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&r.a);
    for i in 0..n {
        m[(i, n)] = r.b[i];
        m[(n, i)] = r.c[i];
    }
    m[(n, n)] = r.d;
    m
}

/// Relative degree: 0 when `d != 0`, otherwise the smallest `r` with
/// `c' A^{r-1} b != 0`.
pub fn relative_degree(r: &Realization, tol: &Tolerances) -> Result<usize> {
    if r.d != 0.0 {
        return Ok(0);
    }
    let n = r.order();
    let scale = r.b.norm() * r.c.norm();
    if n == 0 || scale == 0.0 {
        return Err(HinfError::IdenticallyZeroChannel("realization"));
    }
    let mut v = r.b.clone();
    let mut pow_scale = scale;
    for k in 0..n {
        let markov = r.c.dot(&v);
        if markov.abs() > tol.tau_rank(n, pow_scale) {
            return Ok(k + 1);
        }
        v = &r.a * v;
        pow_scale *= r.a.norm().max(1.0);
    }
    Err(HinfError::IdenticallyZeroChannel("realization"))
}

/// Finite invariant zeros with multiplicity and classification.
pub fn compute_zeros(r: &Realization, tol: &Tolerances) -> Result<Vec<InvariantZero>> {
    let b_zero = r.b.norm() == 0.0 && r.d == 0.0;
    let c_zero = r.c.norm() == 0.0 && r.d == 0.0;
    if b_zero && c_zero {
        return Err(HinfError::DegenerateRealization);
    }
    let eigs = finite_zero_eigenvalues(r, tol)?;
    let clusters = cluster_eigenvalues(&eigs, tol.tau_cluster(r.scale()));
    let tau_axis = tol.tau_axis(r.scale());
    let mut zeros = Vec::new();
    for cl in clusters {
        let klass = if cl.value.re < -tau_axis {
            ZeroClass::Stable
        } else if cl.value.re <= tau_axis {
            ZeroClass::Imaginary
        } else {
            ZeroClass::Unstable
        };
        let value = if klass == ZeroClass::Imaginary {
            Complex64::new(0.0, cl.value.im)
        } else {
            cl.value
        };
        zeros.push(InvariantZero { value, multiplicity: cl.multiplicity, klass });
    }
    Ok(zeros)
}

/// Raw (unclustered) finite zeros of the pencil.
fn finite_zero_eigenvalues(r: &Realization, tol: &Tolerances) -> Result<Vec<Complex64>> {
    let n = r.order();
    if n == 0 {
        return Ok(Vec::new());
    }
    if r.d != 0.0 {
        // Schur complement of the pencil: zeros = eig(A - b c'/d).
        let m = &r.a - (&r.b * r.c.transpose()) / r.d;
        return real_eigenvalues(&m);
    }
    let deg = relative_degree(r, tol)?;
    if deg >= n {
        return Ok(Vec::new());
    }
    // Zero dynamics: restrict A - b (c'A^{deg-1}b)^{-1} c'A^deg to the
    // subspace annihilated by c', c'A, ..., c'A^{deg-1}.
    let mut obs = DMatrix::zeros(deg, n);
    let mut row = r.c.transpose();
    let mut lead = 0.0;
    for k in 0..deg {
        obs.row_mut(k).copy_from(&row);
        lead = (&row * &r.b)[(0, 0)];
        row *= &r.a;
    }
    // `row` now holds c'A^deg and `lead` holds c'A^{deg-1}b != 0.
    let svd = obs.transpose().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    let mut basis = DMatrix::zeros(n, n - deg);
    // Null space of obs = columns of u beyond the rank (= deg here).
    let mut kept = 0;
    let tau = tol.tau_rank(n, svd.singular_values.max());
    for j in 0..u.ncols() {
        let sv = if j < svd.singular_values.len() {
            svd.singular_values[j]
        } else {
            0.0
        };
        if sv <= tau {
            if kept < n - deg {
                basis.column_mut(kept).copy_from(&u.column(j));
                kept += 1;
            }
        }
    }
    if kept < n - deg {
        // The thin SVD may not expose the full null space; complete with QR.
        let full = complete_nullspace(&obs, n - deg, tol)?;
        basis = full;
    }
    let a_z = &r.a - (&r.b * row) / lead;
    let restricted = basis.transpose() * a_z * &basis;
    real_eigenvalues(&restricted)
}

/// Orthonormal null-space basis of `m` (rows x n), expected dimension `k`.
fn complete_nullspace(m: &DMatrix<f64>, k: usize, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let tau = tol.tau_rank(n, svd.singular_values.max());
    let rank = svd.singular_values.iter().filter(|&&s| s > tau).count();
    if n - rank < k {
        return Err(HinfError::IllConditioned(format!(
            "null space dimension {} below expected {}",
            n - rank,
            k
        )));
    }
    // Rows of v_t beyond the rank span the null space, but the thin SVD of
    // a wide matrix omits them; build the orthogonal complement explicitly.
    let mut proj = DMatrix::<f64>::identity(n, n);
    for i in 0..rank.min(vt.nrows()) {
        let v = vt.row(i).transpose();
        proj -= &v * v.transpose();
    }
    let qr = proj.qr();
    let q = qr.q();
    let rmat = qr.r();
    let mut basis = DMatrix::zeros(n, k);
    let mut kept = 0;
    for j in 0..n {
        if kept == k {
            break;
        }
        if rmat[(j, j)].abs() > 1e-8 {
            basis.column_mut(kept).copy_from(&q.column(j));
            kept += 1;
        }
    }
    if kept < k {
        return Err(HinfError::IllConditioned(
            "null-space completion failed".to_string(),
        ));
    }
    Ok(basis)
}

fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| HinfError::IllConditioned("Schur iteration failed".to_string()))?;
    let mut eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    Ok(eigs)
}

struct Cluster {
    value: Complex64,
    multiplicity: usize,
}

/// Groups eigenvalues within `tau` of each other and pairs conjugates.
fn cluster_eigenvalues(eigs: &[Complex64], tau: f64) -> Vec<Cluster> {
    let m = eigs.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if (eigs[i] - eigs[j]).norm() <= tau {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..m {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .values()
        .map(|ids| {
            let mean = ids.iter().map(|&i| eigs[i]).sum::<Complex64>() / ids.len() as f64;
            // A cluster that straddles the real axis represents a real zero.
            let value = if mean.im.abs() <= tau {
                Complex64::new(mean.re, 0.0)
            } else {
                mean
            };
            Cluster { value, multiplicity: ids.len() }
        })
        .collect();
    // Enforce exact conjugate symmetry: pair +im clusters with -im ones.
    for i in 0..clusters.len() {
        if clusters[i].value.im > 0.0 {
            let conj = clusters[i].value.conj();
            if let Some(j) = clusters
                .iter()
                .position(|c| c.value.im < 0.0 && (c.value - conj).norm() <= 2.0 * tau.max(1e-300))
            {
                let mean_re = 0.5 * (clusters[i].value.re + clusters[j].value.re);
                let mean_im = 0.5 * (clusters[i].value.im - clusters[j].value.im);
                clusters[i].value = Complex64::new(mean_re, mean_im);
                clusters[j].value = Complex64::new(mean_re, -mean_im);
            }
        }
    }
    clusters.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .expect("finite")
    });
    clusters
}

/// Left null vectors for all computed zeros, assembled into stable /
/// unstable / axis blocks.
pub fn left_null_vectors(
    r: &Realization,
    zeros: &[InvariantZero],
    tol: &Tolerances,
) -> Result<(RealBlock, RealBlock, Vec<ImagPair>, f64)> {
    let n = r.order();
    let m_full = rosenbrock(r);
    let norm_m = m_full.norm();
    let tau_null = tol.tau_rank(n + 1, norm_m);

    let mut stable_parts: Vec<RealBlock> = Vec::new();
    let mut unstable_parts: Vec<RealBlock> = Vec::new();
    let mut imag_pairs: Vec<ImagPair> = Vec::new();

    for z in zeros {
        if z.value.im < 0.0 {
            continue; // conjugate of an already-processed pair
        }
        if z.value.im == 0.0 {
            let chain = real_chain(r, z.value.re, z.multiplicity, tau_null)?;
            let block = jordan_block_real(z.value.re, &chain, n);
            match z.klass {
                ZeroClass::Stable => stable_parts.push(block),
                ZeroClass::Unstable => unstable_parts.push(block),
                ZeroClass::Imaginary => {
                    // Real zero on the axis is the origin; represent it as a
                    // degenerate "pair" with zero imaginary part.
                    let (s, f) = (&chain[0].0, chain[0].1);
                    imag_pairs.push(ImagPair {
                        value: Complex64::new(0.0, 0.0),
                        s: s.map(|x| Complex64::new(x, 0.0)),
                        f: Complex64::new(f, 0.0),
                        multiplicity: z.multiplicity,
                    });
                }
            }
        } else {
            let chain = complex_chain(r, z.value, z.multiplicity, tau_null)?;
            match z.klass {
                ZeroClass::Imaginary => {
                    let (s, f) = chain[0].clone();
                    imag_pairs.push(ImagPair {
                        value: z.value,
                        s,
                        f,
                        multiplicity: z.multiplicity,
                    });
                }
                _ => {
                    let block = rotation_block(z.value, &chain, n);
                    if z.klass == ZeroClass::Stable {
                        stable_parts.push(block);
                    } else {
                        unstable_parts.push(block);
                    }
                }
            }
        }
    }

    let stable = concat_blocks(n, &stable_parts);
    let unstable = concat_blocks(n, &unstable_parts);

    let mut residual: f64 = 0.0;
    for block in [&stable, &unstable] {
        residual = residual.max(block_residual(&m_full, block));
    }
    for pair in &imag_pairs {
        residual = residual.max(pair_residual(&m_full, pair));
    }
    let limit = tol.residual_factor * norm_m.max(1.0);
    if residual > limit {
        return Err(HinfError::NullspaceExtractionFailure { residual, limit });
    }
    Ok((stable, unstable, imag_pairs, residual))
}

/// Right null vectors: left null vectors of the transposed realization.
pub fn right_null_vectors(
    r: &Realization,
    zeros: &[InvariantZero],
    tol: &Tolerances,
) -> Result<(RealBlock, RealBlock, Vec<ImagPair>, f64)> {
    left_null_vectors(&r.transposed(), zeros, tol)
}

/// Residual `||(S' f) M - Lambda' (S' 0)||_F / max(1, ||M||_F)`.
pub fn block_residual(m_full: &DMatrix<f64>, block: &RealBlock) -> f64 {
    let k = block.dim();
    if k == 0 {
        return 0.0;
    }
    let n = block.s.nrows();
    let mut sf = DMatrix::zeros(k, n + 1);
    sf.view_mut((0, 0), (k, n)).copy_from(&block.s.transpose());
    sf.view_mut((0, n), (k, 1)).copy_from(&DMatrix::from_column_slice(k, 1, block.f.as_slice()));
    let mut s0 = DMatrix::zeros(k, n + 1);
    s0.view_mut((0, 0), (k, n)).copy_from(&block.s.transpose());
    let res = &sf * m_full - block.lambda.transpose() * s0;
    res.norm() / m_full.norm().max(1.0)
}

fn pair_residual(m_full: &DMatrix<f64>, pair: &ImagPair) -> f64 {
    let n = pair.s.len();
    let mut w = DVector::<Complex64>::zeros(n + 1);
    for i in 0..n {
        w[i] = pair.s[i];
    }
    w[n] = pair.f;
    let mc = m_full.map(|x| Complex64::new(x, 0.0));
    let lhs = mc.transpose() * &w;
    let mut rhs = DVector::<Complex64>::zeros(n + 1);
    for i in 0..n {
        rhs[i] = pair.value * pair.s[i];
    }
    (lhs - rhs).norm() / m_full.norm().max(1.0)
}

/// Chain of real left null vectors `(s_k, f_k)` at a real zero.
fn real_chain(
    r: &Realization,
    lambda: f64,
    multiplicity: usize,
    tau_null: f64,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let n = r.order();
    let mut m = rosenbrock(r);
    for i in 0..n {
        m[(i, i)] -= lambda;
    }
    let mt = m.transpose();
    let svd = mt.clone().svd(true, true);
    let geo = svd
        .singular_values
        .iter()
        .filter(|&&s| s <= tau_null.max(svd.singular_values.max() * 1e-10))
        .count()
        .max(1);
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut vectors: Vec<DVector<f64>> = Vec::new();
    let total = svd.singular_values.len();
    for idx in 0..geo.min(multiplicity) {
        // Smallest singular values come last in nalgebra's ordering only
        // after sorting; locate them explicitly.
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap()
        });
        let row = order[idx];
        vectors.push(vt.row(row).transpose());
    }
    // Extend with generalized vectors until the algebraic multiplicity is
    // reached: solve M(lambda)' w_k = (s_{k-1}; 0).
    while vectors.len() < multiplicity {
        let prev = vectors.last().expect("chain base");
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = prev[i];
        }
        let w = pseudo_solve(&svd, &rhs, tau_null);
        vectors.push(w);
    }
    // Normalize the chain: unit leading vector, consistent sign.
    let scale = vectors[0].norm();
    if scale == 0.0 {
        return Err(HinfError::NullspaceExtractionFailure {
            residual: f64::INFINITY,
            limit: tau_null,
        });
    }
    let sign = dominant_sign(&vectors[0]);
    let factor = sign / scale;
    let vectors: Vec<_> = vectors.into_iter().map(|v| v * factor).collect();
    Ok(vectors
        .into_iter()
        .map(|v| {
            let s = DVector::from_iterator(n, v.iter().take(n).copied());
            let f = v[n];
            (s, f)
        })
        .collect())
}

/// Minimal-norm least-squares solve using a precomputed SVD, with small
/// singular values treated as zero.
fn pseudo_solve(
    svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &DVector<f64>,
    tau: f64,
) -> DVector<f64> {
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut y = u.transpose() * rhs;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > tau.max(svd.singular_values.max() * 1e-12) {
            y[i] /= *s;
        } else {
            y[i] = 0.0;
        }
    }
    vt.transpose() * y
}

/// Chain of complex left null vectors at a complex zero (`Im > 0`).
fn complex_chain(
    r: &Realization,
    lambda: Complex64,
    multiplicity: usize,
    tau_null: f64,
) -> Result<Vec<(DVector<Complex64>, Complex64)>> {
    let n = r.order();
    // Realified system: M(lambda)' w = 0 with w = wr + i wi becomes a
    // 2(n+1)-dimensional real null-space problem.
    let mut mre = rosenbrock(r);
    for i in 0..n {
        mre[(i, i)] -= lambda.re;
    }
    let mt_re = mre.transpose();
    let mut mt_im = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        mt_im[(i, i)] = -lambda.im;
    }
    let dim = n + 1;
    let mut big = DMatrix::zeros(2 * dim, 2 * dim);
    big.view_mut((0, 0), (dim, dim)).copy_from(&mt_re);
    big.view_mut((0, dim), (dim, dim)).copy_from(&(-&mt_im));
    big.view_mut((dim, 0), (dim, dim)).copy_from(&mt_im);
    big.view_mut((dim, dim), (dim, dim)).copy_from(&mt_re);

    let svd = big.clone().svd(true, true);
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let total = svd.singular_values.len();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[i]
            .partial_cmp(&svd.singular_values[j])
            .unwrap()
    });
    let base = vt.row(order[0]).transpose();
    let mut w = DVector::<Complex64>::zeros(dim);
    for i in 0..dim {
        w[i] = Complex64::new(base[i], base[i + dim]);
    }
    // Phase-normalize: dominant component real positive, unit norm.
    let phase = dominant_phase(&w);
    let norm = w.norm();
    if norm == 0.0 {
        return Err(HinfError::NullspaceExtractionFailure {
            residual: f64::INFINITY,
            limit: tau_null,
        });
    }
    let factor = phase.conj() / Complex64::new(norm, 0.0);
    let mut chain = vec![w * factor];
    while chain.len() < multiplicity {
        // Generalized vector: realified least-squares solve of
        // M(lambda)' w_k = (s_{k-1}; 0).
        let prev = chain.last().expect("chain base");
        let mut rhs = DVector::zeros(2 * dim);
        for i in 0..n {
            rhs[i] = prev[i].re;
            rhs[i + dim] = prev[i].im;
        }
        let sol = pseudo_solve(&svd, &rhs, tau_null);
        let mut wk = DVector::<Complex64>::zeros(dim);
        for i in 0..dim {
            wk[i] = Complex64::new(sol[i], sol[i + dim]);
        }
        chain.push(wk);
    }
    Ok(chain
        .into_iter()
        .map(|w| {
            let s = DVector::from_iterator(n, w.iter().take(n).copied());
            (s, w[n])
        })
        .collect())
}

fn dominant_sign(v: &DVector<f64>) -> f64 {
    let mut best = 0usize;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn dominant_phase(v: &DVector<Complex64>) -> Complex64 {
    let mut best = 0usize;
    for i in 0..v.len() {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// Upper Jordan block for a real chain: row k satisfies
/// `(s_k' f_k) M = lambda (s_k' 0) + (s_{k-1}' 0)`.
fn jordan_block_real(lambda: f64, chain: &[(DVector<f64>, f64)], n: usize) -> RealBlock {
    let m = chain.len();
    let mut block = DMatrix::zeros(m, m);
    let mut s = DMatrix::zeros(n, m);
    let mut f = DVector::zeros(m);
    for k in 0..m {
        block[(k, k)] = lambda;
        if k + 1 < m {
            block[(k, k + 1)] = 1.0;
        }
        s.column_mut(k).copy_from(&chain[k].0);
        f[k] = chain[k].1;
    }
    RealBlock { lambda: block, s, f }
}

/// Real 2x2-per-element block for a complex chain at `lambda = a + b i`.
fn rotation_block(
    lambda: Complex64,
    chain: &[(DVector<Complex64>, Complex64)],
    n: usize,
) -> RealBlock {
    let m = chain.len();
    let rot = DMatrix::from_row_slice(2, 2, &[lambda.re, lambda.im, -lambda.im, lambda.re]);
    let mut block = DMatrix::zeros(2 * m, 2 * m);
    let mut s = DMatrix::zeros(n, 2 * m);
    let mut f = DVector::zeros(2 * m);
    for k in 0..m {
        block.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&rot);
        if k + 1 < m {
            block[(2 * k, 2 * k + 2)] = 1.0;
            block[(2 * k + 1, 2 * k + 3)] = 1.0;
        }
        for i in 0..n {
            s[(i, 2 * k)] = chain[k].0[i].re;
            s[(i, 2 * k + 1)] = chain[k].0[i].im;
        }
        f[2 * k] = chain[k].1.re;
        f[2 * k + 1] = chain[k].1.im;
    }
    RealBlock { lambda: block, s, f }
}

fn concat_blocks(n: usize, parts: &[RealBlock]) -> RealBlock {
    let k: usize = parts.iter().map(RealBlock::dim).sum();
    let mut lambda = DMatrix::zeros(k, k);
    let mut s = DMatrix::zeros(n, k);
    let mut f = DVector::zeros(k);
    let mut at = 0;
    for b in parts {
        let d = b.dim();
        lambda.view_mut((at, at), (d, d)).copy_from(&b.lambda);
        s.view_mut((0, at), (n, d)).copy_from(&b.s);
        f.rows_mut(at, d).copy_from(&b.f);
        at += d;
    }
    RealBlock { lambda, s, f }
}

/// Infinite-zero basis for a realization of relative degree `r`:
/// `P = [0, c, A'c, ..., (A')^{r-2} c]`, `p = e_1`.
pub fn infinite_zero_basis(r: &Realization, tol: &Tolerances) -> Result<InfiniteBasis> {
    let n = r.order();
    let deg = relative_degree(r, tol)?;
    let mut p_mat = DMatrix::zeros(n, deg);
    let mut p_vec = DVector::zeros(deg);
    let mut p_hat = DMatrix::zeros(n, deg);
    if deg > 0 {
        p_vec[0] = 1.0;
        let mut v = r.c.clone();
        for j in 1..deg {
            p_mat.column_mut(j).copy_from(&v);
            v = r.a.transpose() * v;
        }
        let mut v = r.c.clone();
        for j in 0..deg {
            p_hat.column_mut(j).copy_from(&v);
            v = r.a.transpose() * v;
        }
    }
    Ok(InfiniteBasis { p_mat, p_vec, p_hat })
}

/// Full zero data pipeline for one realization (left null vectors).
pub fn zero_data(r: &Realization, tol: &Tolerances) -> Result<ZeroData> {
    let n = r.order();
    let zeros = compute_zeros(r, tol)?;
    let deg = if r.d != 0.0 { 0 } else { relative_degree(r, tol)? };
    let total: usize = zeros.iter().map(|z| z.multiplicity).sum();
    if total + deg != n {
        return Err(HinfError::IllConditioned(format!(
            "zero count {total} + relative degree {deg} != n = {n}"
        )));
    }
    let (stable, unstable, imag_pairs, residual) = left_null_vectors(r, &zeros, tol)?;
    let infinite = infinite_zero_basis(r, tol)?;
    let mut zd = ZeroData {
        zeros,
        relative_degree: deg,
        stable,
        unstable,
        imag_pairs,
        infinite,
        residual,
        s_condition: None,
        n,
    };
    if r.d != 0.0 {
        let stacked = zd.stacked();
        let svd = stacked.s.clone().svd(false, false);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        zd.s_condition = Some(if smin > 0.0 { smax / smin } else { f64::INFINITY });
    }
    Ok(zd)
}

/// Stable/unstable/axis partition accessor in the order used throughout:
/// `(stable, unstable, axis pairs)` with `k1 = unstable.dim()`.
pub fn partition_zeros(zd: &ZeroData) -> (&RealBlock, &RealBlock, &[ImagPair]) {
    (&zd.stable, &zd.unstable, &zd.imag_pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::Realization;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn real1(a: f64, b: f64, c: f64, d: f64) -> Realization {
        Realization {
            a: dmatrix![a],
            b: DVector::from_vec(vec![b]),
            c: DVector::from_vec(vec![c]),
            d,
        }
    }

    #[test]
    fn zero_of_biproper_first_order() {
        // det [[-1-z, 1], [-2, 1]] = 0 at z = 1 (2x2 determinant oracle).
        let r = real1(-1.0, 1.0, -2.0, 1.0);
        let zs = compute_zeros(&r, &tol()).unwrap();
        assert_eq!(zs.len(), 1);
        assert_relative_eq!(zs[0].value.re, 1.0, epsilon = 1e-10);
        assert_eq!(zs[0].klass, ZeroClass::Unstable);
    }

    #[test]
    fn scalar_schur_complement_formula() {
        // d != 0: single zero at A - b c / d.
        let r = real1(3.0, 2.0, 5.0, 4.0);
        let zs = compute_zeros(&r, &tol()).unwrap();
        assert_relative_eq!(zs[0].value.re, 3.0 - 2.0 * 5.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn integrator_has_no_finite_zeros() {
        let r = real1(0.0, 1.0, 1.0, 0.0);
        let zs = compute_zeros(&r, &tol()).unwrap();
        assert!(zs.is_empty());
        assert_eq!(relative_degree(&r, &tol()).unwrap(), 1);
    }

    #[test]
    fn relative_degree_two() {
        let r = Realization {
            a: dmatrix![0.0, 1.0; 0.0, 0.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![1.0, 0.0]),
            d: 0.0,
        };
        assert_eq!(relative_degree(&r, &tol()).unwrap(), 2);
    }

    #[test]
    fn relative_degree_zero_when_biproper() {
        assert_eq!(relative_degree(&real1(1.0, 1.0, 1.0, 1.0), &tol()).unwrap(), 0);
    }

    #[test]
    fn identically_zero_errors() {
        let r = Realization {
            a: dmatrix![-1.0, 0.0; 0.0, -2.0],
            b: DVector::from_vec(vec![1.0, 0.0]),
            c: DVector::from_vec(vec![0.0, 1.0]),
            d: 0.0,
        };
        assert!(matches!(
            relative_degree(&r, &tol()),
            Err(HinfError::IdenticallyZeroChannel(_))
        ));
    }

    #[test]
    fn degenerate_realization_rejected() {
        let r = Realization {
            a: dmatrix![1.0],
            b: DVector::from_vec(vec![0.0]),
            c: DVector::from_vec(vec![0.0]),
            d: 0.0,
        };
        assert!(matches!(
            compute_zeros(&r, &tol()),
            Err(HinfError::DegenerateRealization)
        ));
    }

    #[test]
    fn left_null_vector_first_order() {
        // (s f) [[-1, 1], [-2, 1]] = 1 (s 0) gives f = -s.
        let r = real1(-1.0, 1.0, -2.0, 1.0);
        let zd = zero_data(&r, &tol()).unwrap();
        assert_eq!(zd.unstable.dim(), 1);
        let s = zd.unstable.s[(0, 0)];
        let f = zd.unstable.f[0];
        assert_relative_eq!(f, -s, epsilon = 1e-12);
        assert!(zd.residual < 1e-10);
    }

    #[test]
    fn zero_count_plus_degree_is_n() {
        // Strictly proper two-state system with one finite zero.
        let r = Realization {
            a: dmatrix![0.0, 1.0; -2.0, -3.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![-1.0, 1.0]),
            d: 0.0,
        };
        let zd = zero_data(&r, &tol()).unwrap();
        assert_eq!(zd.total_finite() + zd.relative_degree, 2);
        // Numerator is s - 1: single unstable zero at 1.
        assert_eq!(zd.unstable.dim(), 1);
        assert_relative_eq!(zd.unstable.lambda[(0, 0)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn transfer_vanishes_at_zero() {
        use crate::plant::{transfer_eval, SPoint};
        let r = Realization {
            a: dmatrix![0.0, 1.0; -2.0, -3.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![-1.0, 1.0]),
            d: 0.0,
        };
        let zd = zero_data(&r, &tol()).unwrap();
        for z in &zd.zeros {
            let g = transfer_eval(&r, SPoint::Finite(z.value)).unwrap();
            assert!(g.norm() <= 1e-8 * (1.0 + r.d.abs()));
        }
    }

    #[test]
    fn axis_pair_detected_and_routed() {
        // G_zu numerator s^2 + 1 over (s+1)(s+2), biproper with d = 1.
        // c'(sI-A)^{-1}b = (-3s - 1)/(s^2+3s+2).
        let r = Realization {
            a: dmatrix![0.0, 1.0; -2.0, -3.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![-1.0, -3.0]),
            d: 1.0,
        };
        let zd = zero_data(&r, &tol()).unwrap();
        assert_eq!(zd.m_imag(), 1);
        let pair = &zd.imag_pairs[0];
        assert_relative_eq!(pair.value.im, 1.0, epsilon = 1e-9);
        assert_relative_eq!(pair.value.re, 0.0, epsilon = 1e-12);
        assert!(pair.f.norm() > 1e-8);
        // Rotation block matches the stacked identity.
        assert_eq!(pair.rotation()[(0, 1)], pair.value.im);
    }

    #[test]
    fn jordan_chain_double_zero() {
        // Numerator (s-1)^2, denominator (s+2)(s+3)(s+4): relative degree 1,
        // double zero at +1.
        // Controllable canonical form of (s^2 - 2s + 1)/(s^3 + 9s^2 + 26s + 24).
        let r = Realization {
            a: dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; -24.0, -26.0, -9.0],
            b: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            c: DVector::from_vec(vec![1.0, -2.0, 1.0]),
            d: 0.0,
        };
        let zd = zero_data(&r, &tol()).unwrap();
        assert_eq!(zd.unstable.dim(), 2);
        assert_relative_eq!(zd.unstable.lambda[(0, 0)], 1.0, epsilon = 1e-6);
        assert_relative_eq!(zd.unstable.lambda[(0, 1)], 1.0, epsilon = 1e-12);
        assert!(zd.residual < 1e-8);
    }

    #[test]
    fn infinite_basis_shapes_and_orthogonality() {
        let r = Realization {
            a: dmatrix![0.0, 1.0; 0.0, 0.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![1.0, 0.0]),
            d: 0.0,
        };
        let basis = infinite_zero_basis(&r, &tol()).unwrap();
        // r = 2: columns {0, c}, p = (1, 0).
        assert_eq!(basis.p_mat.ncols(), 2);
        assert_eq!(basis.p_mat.column(0).norm(), 0.0);
        assert_relative_eq!((basis.p_mat.column(1) - &r.c).norm(), 0.0);
        assert_eq!(basis.p_vec, DVector::from_vec(vec![1.0, 0.0]));
        // Orthogonality: (b' (A^k)' P)_j = 0 for k = 0..r-1, j <= r-k.
        for k in 0..2usize {
            let mut v = r.b.clone();
            for _ in 0..k {
                v = &r.a * v;
            }
            let prod = basis.p_mat.transpose() * &v;
            for j in 0..(2 - k) {
                assert_relative_eq!(prod[j], 0.0, epsilon = 1e-10);
            }
        }
        // p_hat identity residual.
        let lhs = r.a.transpose() * &basis.p_mat
            + &r.c * basis.p_vec.transpose();
        assert_relative_eq!((lhs - &basis.p_hat).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn infinite_basis_degenerate_degree_zero() {
        let r = real1(1.0, 1.0, 1.0, 1.0);
        let basis = infinite_zero_basis(&r, &tol()).unwrap();
        assert_eq!(basis.p_mat.ncols(), 0);
        assert_eq!(basis.p_vec.len(), 0);
    }

    #[test]
    fn square_s_for_biproper_and_condition_reported() {
        let r = Realization {
            a: dmatrix![0.0, 1.0; -2.0, -3.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![5.0, 7.0]),
            d: 2.0,
        };
        let zd = zero_data(&r, &tol()).unwrap();
        assert_eq!(zd.total_finite(), 2);
        let cond = zd.s_condition.expect("condition for d != 0");
        assert!(cond.is_finite());
    }

    #[test]
    fn right_null_vector_scalar_biproper() {
        // Right null vector of [[a, b], [c, d]] is proportional to
        // (d, -c).
        let r = real1(3.0, 2.0, 5.0, 4.0);
        let zs = compute_zeros(&r, &tol()).unwrap();
        let (_, unstable, _, _) = right_null_vectors(&r, &zs, &tol()).unwrap();
        assert_eq!(unstable.dim(), 1);
        let v = unstable.s[(0, 0)];
        let vhat = unstable.f[0];
        // (v, vhat) proportional to (d, -c) = (4, -5).
        assert_relative_eq!(v * (-5.0), vhat * 4.0, epsilon = 1e-10);
    }

    #[test]
    fn unstable_zero_has_nonzero_input_part() {
        // Stabilizable pair with an unstable zero forces f != 0.
        let r = real1(-1.0, 1.0, -2.0, 1.0);
        let zd = zero_data(&r, &tol()).unwrap();
        assert!(zd.unstable.f[0].abs() > 1e-8);
    }

    #[test]
    fn partition_routes_all_stable() {
        let r = Realization {
            a: dmatrix![0.0, 1.0; -2.0, -3.0],
            b: DVector::from_vec(vec![0.0, 1.0]),
            c: DVector::from_vec(vec![1.0, 1.0]),
            d: 0.0,
        };
        // Numerator s + 1: stable zero.
        let zd = zero_data(&r, &tol()).unwrap();
        let (stable, unstable, imag) = partition_zeros(&zd);
        assert_eq!(stable.dim(), 1);
        assert_eq!(unstable.dim(), 0);
        assert!(imag.is_empty());
    }
}
