//! Dense Lyapunov and Sylvester solvers plus the Gramian set feeding the
//! closed form.
//!
//! Everything is Bartels–Stewart on real Schur forms: reduce, solve the
//! quasi-triangular system by block back-substitution, transform back.
//! Problem sizes here are tiny (zero counts of desk-scale plants), so no
//! attempt is made at blocking or balancing.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{HinfError, Result};
use crate::plant::StateSpacePlant;
use crate::zeros::ZeroData;

/// Lyapunov Gramians of the unstable zero data plus the coupling terms.
///
/// `f_plus` solves `(-L')F + F(-L) = -f f'` for the unstable block `L`,
/// and similarly for the other three; `j_plus = T+' S+`,
/// `h1_plus = S+' b1 + d11 f+`, `h2_plus = T+' c1 + d11 g+`.
#[derive(Debug, Clone)]
pub struct GramianSet {
    pub f_plus: DMatrix<f64>,
    pub g_plus: DMatrix<f64>,
    pub h1_plus: DMatrix<f64>,
    pub h2_plus: DMatrix<f64>,
    pub j_plus: DMatrix<f64>,
    pub h1_vec: DVector<f64>,
    pub h2_vec: DVector<f64>,
    /// Max Lyapunov residual over the four solves, relative.
    pub residual: f64,
}

impl GramianSet {
    pub fn k1(&self) -> usize {
        self.f_plus.nrows()
    }

    pub fn k2(&self) -> usize {
        self.g_plus.nrows()
    }

    /// True when the reduced problem is structurally zero (the exact
    /// characterization of a vanishing limit): `h1 = 0`, `h2 = 0`, `J = O`.
    pub fn is_trivially_zero(&self, tol: f64) -> bool {
        self.h1_vec.norm() <= tol && self.h2_vec.norm() <= tol && self.j_plus.norm() <= tol
    }
}

/// Solves `M'X + XM = -Q` for symmetric `Q` with `M` Hurwitz.
pub fn solve_lyapunov(m: &DMatrix<f64>, q: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if q.nrows() != n || q.ncols() != n {
        return Err(HinfError::Dimension("lyapunov rhs".to_string()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eigs = m
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| HinfError::IllConditioned("Schur failed".to_string()))?
        .complex_eigenvalues();
    let tau = tol.tau_axis(m.norm());
    for e in eigs.iter() {
        if e.re >= 0.0 {
            return Err(HinfError::NotHurwitz(e.re));
        }
        if e.re >= -tau {
            return Err(HinfError::IllConditioned(format!(
                "eigenvalue {:.3e} within {tau:.3e} of the axis",
                e.re
            )));
        }
    }
    // M'X + XM = -Q is the Sylvester equation A X + X B = C with
    // A = M', B = M, C = -Q.
    let x = sylvester_schur(&m.transpose(), m, &(-q))?;
    // Symmetrize: the exact solution is symmetric for symmetric Q.
    Ok((&x + x.transpose()) * 0.5)
}

/// Solves `A X + X B = C` for general square `A`, `B` with disjoint
/// spectra of `A` and `-B`.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    sylvester_schur(a, b, c)
}

fn sylvester_schur(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (na, nb) = (a.nrows(), b.nrows());
    if c.nrows() != na || c.ncols() != nb {
        return Err(HinfError::Dimension("sylvester rhs".to_string()));
    }
    if na == 0 || nb == 0 {
        return Ok(DMatrix::zeros(na, nb));
    }
    let sep = spectra_separation(a, b)?;
    if sep <= 1e-12 * (a.norm() + b.norm()).max(1.0) {
        return Err(HinfError::SpectraOverlap(sep));
    }
    let (ua, ta) = a
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| HinfError::IllConditioned("Schur failed".to_string()))?
        .unpack();
    let (ub, tb) = b
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| HinfError::IllConditioned("Schur failed".to_string()))?
        .unpack();
    let f = ua.transpose() * c * &ub;
    let y = sylvester_quasi_triangular(&ta, &tb, &f)?;
    Ok(&ua * y * ub.transpose())
}

fn spectra_separation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let ea = a
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| HinfError::IllConditioned("Schur failed".to_string()))?
        .complex_eigenvalues();
    let eb = b
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| HinfError::IllConditioned("Schur failed".to_string()))?
        .complex_eigenvalues();
    let mut sep = f64::INFINITY;
    for x in ea.iter() {
        for y in eb.iter() {
            sep = sep.min((x + y).norm());
        }
    }
    Ok(sep)
}

/// Back-substitution for `T_A Y + Y T_B = F` with both factors real
/// quasi-upper-triangular. Diagonal blocks are 1x1 or 2x2, so each step
/// is a dense Kronecker solve of size at most 4.
fn sylvester_quasi_triangular(
    ta: &DMatrix<f64>,
    tb: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let na = ta.nrows();
    let nb = tb.nrows();
    let a_blocks = diagonal_blocks(ta);
    let b_blocks = diagonal_blocks(tb);
    let mut y = DMatrix::zeros(na, nb);

    // T_A is upper-triangular: sweep its blocks bottom-up. T_B is
    // upper-triangular: sweep its blocks left-to-right.
    for &(j0, js) in &b_blocks {
        for &(i0, is_) in a_blocks.iter().rev() {
            // RHS = F_ij - sum_{k>i} (T_A)_{ik} Y_kj - sum_{l<j} Y_il (T_B)_{lj}
            let mut rhs = f.view((i0, j0), (is_, js)).into_owned();
            if i0 + is_ < na {
                let ta_right = ta.view((i0, i0 + is_), (is_, na - i0 - is_));
                let y_below = y.view((i0 + is_, j0), (na - i0 - is_, js));
                rhs -= ta_right * y_below;
            }
            if j0 > 0 {
                let y_left = y.view((i0, 0), (is_, j0));
                let tb_up = tb.view((0, j0), (j0, js));
                rhs -= y_left * tb_up;
            }
            // Solve (T_A)_ii X + X (T_B)_jj = rhs via Kronecker.
            let aii = ta.view((i0, i0), (is_, is_)).into_owned();
            let bjj = tb.view((j0, j0), (js, js)).into_owned();
            let dim = is_ * js;
            let mut k = DMatrix::zeros(dim, dim);
            // vec(X) column-major: (I (x) A + B' (x) I) vec(X) = vec(rhs).
            for p in 0..js {
                for q in 0..js {
                    for r in 0..is_ {
                        for s in 0..is_ {
                            let mut v = 0.0;
                            if p == q {
                                v += aii[(r, s)];
                            }
                            if r == s {
                                v += bjj[(q, p)];
                            }
                            k[(p * is_ + r, q * is_ + s)] = v;
                        }
                    }
                }
            }
            let rhs_vec = DVector::from_iterator(dim, rhs.iter().copied());
            let sol = k
                .lu()
                .solve(&rhs_vec)
                .ok_or(HinfError::SpectraOverlap(0.0))?;
            for p in 0..js {
                for r in 0..is_ {
                    y[(i0 + r, j0 + p)] = sol[p * is_ + r];
                }
            }
        }
    }
    Ok(y)
}

/// Positions and sizes of the 1x1 / 2x2 diagonal blocks of a real Schur
/// factor.
fn diagonal_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * t.norm().max(1.0) {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Symmetric PSD square root by eigendecomposition.
pub fn sym_sqrt(p: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    check_symmetric(p)?;
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let floor = -1e3 * tol.tau_pd(eig.eigenvalues.iter().sum(), n).max(f64::EPSILON * p.norm());
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < floor {
            return Err(HinfError::NotPsd(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// Inverse symmetric square root; requires positive definiteness above the
/// scale-aware floor.
pub fn inv_sqrt(p: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    check_symmetric(p)?;
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let tau = tol.tau_pd(eig.eigenvalues.iter().sum(), n);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v <= tau {
            return Err(HinfError::NotPd(*v));
        }
        *v = 1.0 / v.sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

fn check_symmetric(p: &DMatrix<f64>) -> Result<()> {
    let asym = (p - p.transpose()).norm();
    if asym > 1e-8 * p.norm().max(1.0) {
        return Err(HinfError::Dimension("matrix is not symmetric".to_string()));
    }
    Ok(())
}

/// Assembles the Gramian set from the unstable zero blocks of the control
/// (`zu`) and measurement (`yw`) channels.
pub fn build_gramians(
    zu: &ZeroData,
    yw: &ZeroData,
    plant: &StateSpacePlant,
    tol: &Tolerances,
) -> Result<GramianSet> {
    let su = &zu.unstable;
    let tu = &yw.unstable;

    let f_vec = &su.f;
    let g_vec = &tu.f;
    let h1_vec = su.s.transpose() * &plant.b1 + f_vec * plant.d11;
    let h2_vec = tu.s.transpose() * &plant.c1 + g_vec * plant.d11;
    let j_plus = tu.s.transpose() * &su.s;

    let m1 = -su.lambda.clone();
    let m2 = -tu.lambda.clone();
    let f_plus = solve_lyapunov(&m1, &(f_vec * f_vec.transpose()), tol)?;
    let h1_plus = solve_lyapunov(&m1, &(&h1_vec * h1_vec.transpose()), tol)?;
    let g_plus = solve_lyapunov(&m2, &(g_vec * g_vec.transpose()), tol)?;
    let h2_plus = solve_lyapunov(&m2, &(&h2_vec * h2_vec.transpose()), tol)?;

    let mut residual: f64 = 0.0;
    for (l, x, q) in [
        (&su.lambda, &f_plus, f_vec * f_vec.transpose()),
        (&su.lambda, &h1_plus, &h1_vec * h1_vec.transpose()),
        (&tu.lambda, &g_plus, g_vec * g_vec.transpose()),
        (&tu.lambda, &h2_plus, &h2_vec * h2_vec.transpose()),
    ] {
        let res = (l.transpose() * x + x * l - &q).norm() / q.norm().max(1.0);
        residual = residual.max(res);
    }
    Ok(GramianSet {
        f_plus,
        g_plus,
        h1_plus,
        h2_plus,
        j_plus,
        h1_vec,
        h2_vec,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn scalar_lyapunov() {
        // M = [-z], Q = [f^2]  =>  X = f^2 / (2z).
        let (z, f) = (2.0, 0.7);
        let x = solve_lyapunov(&dmatrix![-z], &dmatrix![f * f], &tol()).unwrap();
        assert_relative_eq!(x[(0, 0)], f * f / (2.0 * z), epsilon = 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = dmatrix![-1.0, 0.3; 0.0, -2.0];
        let x = solve_lyapunov(&m, &DMatrix::zeros(2, 2), &tol()).unwrap();
        assert_relative_eq!(x.norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn not_hurwitz_rejected() {
        assert!(matches!(
            solve_lyapunov(&dmatrix![0.5], &dmatrix![1.0], &tol()),
            Err(HinfError::NotHurwitz(_))
        ));
    }

    #[test]
    fn jordan_block_reproduces_printed_gramian() {
        // M = [[-z, -1], [0, -z]]: the degree-2 chain case; entries
        // 1/(2z), 1/(4z^2), 1/(4z^3) for f = (1, 1/z).
        let z = 2.0;
        let m = dmatrix![-z, -1.0; 0.0, -z];
        let f = DVector::from_vec(vec![1.0, 1.0 / z]);
        let x = solve_lyapunov(&m, &(&f * f.transpose()), &tol()).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0 / (2.0 * z), epsilon = 1e-12);
        assert_relative_eq!(x[(0, 1)], 1.0 / (4.0 * z * z), epsilon = 1e-12);
        assert_relative_eq!(x[(1, 1)], 1.0 / (4.0 * z * z * z), epsilon = 1e-12);
    }

    #[test]
    fn sylvester_scalar() {
        let x = solve_sylvester(&dmatrix![1.0], &dmatrix![1.0], &dmatrix![4.0]).unwrap();
        assert_relative_eq!(x[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn sylvester_zero_rhs_unique_zero_solution() {
        let a = dmatrix![1.0, 2.0; 0.0, 3.0];
        let b = dmatrix![-4.0, 1.0; 0.0, -5.0];
        let x = solve_sylvester(&a, &b, &DMatrix::zeros(2, 2)).unwrap();
        assert_relative_eq!(x.norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sylvester_matches_kronecker_oracle() {
        // Random-ish fixed 3x3 data with disjoint spectra.
        let a = dmatrix![2.0, 0.3, -0.1; 0.0, 3.0, 0.5; 0.2, 0.0, 4.0];
        let b = dmatrix![-10.0, 0.4, 0.0; 0.0, -20.0, 0.1; 0.3, 0.0, -30.0];
        let c = dmatrix![1.0, 2.0, 3.0; -1.0, 0.5, 0.25; 0.0, 1.5, -2.0];
        let x = solve_sylvester(&a, &b, &c).unwrap();
        // Kronecker oracle: (I (x) A + B' (x) I) vec(X) = vec(C).
        let n = 3;
        let mut k = DMatrix::zeros(n * n, n * n);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let mut v = 0.0;
                        if p == q {
                            v += a[(r, s)];
                        }
                        if r == s {
                            v += b[(q, p)];
                        }
                        k[(p * n + r, q * n + s)] = v;
                    }
                }
            }
        }
        let cv = DVector::from_iterator(n * n, c.iter().copied());
        let xv = k.lu().solve(&cv).unwrap();
        let x_oracle = DMatrix::from_iterator(n, n, xv.iter().copied());
        assert!((x - x_oracle).norm() < 1e-10);
    }

    #[test]
    fn sylvester_overlap_rejected() {
        assert!(matches!(
            solve_sylvester(&dmatrix![1.0], &dmatrix![-1.0], &dmatrix![1.0]),
            Err(HinfError::SpectraOverlap(_))
        ));
    }

    #[test]
    fn sylvester_complex_spectra_blocks() {
        // A has complex eigenvalues (2x2 rotation-like Schur block).
        let a = dmatrix![1.0, 5.0; -5.0, 1.0];
        let b = dmatrix![2.0, 1.0; 0.0, 3.0];
        let c = dmatrix![1.0, 0.0; 0.0, 1.0];
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((&a * &x + &x * &b - &c).norm() < 1e-10 * c.norm().max(1.0));
    }

    #[test]
    fn sqrt_identity_and_diag() {
        let t = tol();
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!((sym_sqrt(&i3, &t).unwrap() - &i3).norm(), 0.0, epsilon = 1e-12);
        let d = dmatrix![4.0, 0.0; 0.0, 9.0];
        let s = sym_sqrt(&d, &t).unwrap();
        assert_relative_eq!(s[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s[(1, 1)], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let t = tol();
        // SPD 4x4 built as G'G + I.
        let g = dmatrix![1.0, 2.0, 0.0, 1.0;
                         0.5, -1.0, 2.0, 0.0;
                         0.0, 1.0, 1.0, -2.0;
                         1.5, 0.0, 0.5, 1.0];
        let p = g.transpose() * &g + DMatrix::identity(4, 4);
        let s = sym_sqrt(&p, &t).unwrap();
        assert!((&s * &s - &p).norm() <= 1e-10 * p.norm());
        let si = inv_sqrt(&p, &t).unwrap();
        assert!((&si * &p * &si - DMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let t = tol();
        let p = dmatrix![1.0, 0.0; 0.0, 0.0];
        assert!(matches!(inv_sqrt(&p, &t), Err(HinfError::NotPd(_))));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let t = tol();
        let p = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(matches!(sym_sqrt(&p, &t), Err(HinfError::NotPsd(_))));
    }

    #[test]
    fn lyapunov_matches_quadrature_oracle() {
        // X = integral exp(M't) Q exp(Mt) dt by composite Simpson on a
        // truncated horizon (valid since ||exp(Mt)|| decays).
        let m = dmatrix![-1.0, 0.5, 0.0; 0.0, -2.0, 1.0; 0.0, 0.0, -1.5];
        let q0 = dmatrix![1.0, 0.2, 0.0; 0.2, 2.0, 0.1; 0.0, 0.1, 0.5];
        let q = (&q0 + q0.transpose()) * 0.5;
        let x = solve_lyapunov(&m, &q, &tol()).unwrap();

        let expm = |t: f64| -> DMatrix<f64> {
            // Scaling-and-squaring with Taylor core, ample for 3x3.
            let mut s = 0;
            let mut norm = (m.norm() * t).max(1e-300);
            while norm > 0.5 {
                norm /= 2.0;
                s += 1;
            }
            let mt = &m * (t / f64::powi(2.0, s));
            let mut acc = DMatrix::identity(3, 3);
            let mut term = DMatrix::identity(3, 3);
            for k in 1..20 {
                term = &term * &mt / k as f64;
                acc += &term;
            }
            for _ in 0..s {
                acc = &acc * acc.clone();
            }
            acc
        };
        let integrand = |t: f64| -> DMatrix<f64> {
            let e = expm(t);
            e.transpose() * &q * e
        };
        let t_max = 30.0;
        let steps = 600;
        let h = t_max / steps as f64;
        let mut acc = DMatrix::zeros(3, 3);
        for i in 0..steps {
            let t0 = i as f64 * h;
            acc += (integrand(t0) + integrand(t0 + h / 2.0) * 4.0 + integrand(t0 + h)) * (h / 6.0);
        }
        assert!((x - acc).norm() < 1e-6 * q.norm());
    }

    #[test]
    fn lyapunov_linearity() {
        let m = dmatrix![-1.0, 0.3; 0.0, -2.0];
        let q1 = dmatrix![1.0, 0.0; 0.0, 1.0];
        let q2 = dmatrix![0.5, 0.2; 0.2, 2.0];
        let t = tol();
        let x1 = solve_lyapunov(&m, &q1, &t).unwrap();
        let x2 = solve_lyapunov(&m, &q2, &t).unwrap();
        let x12 = solve_lyapunov(&m, &(&q1 + &q2), &t).unwrap();
        assert!((&x1 + &x2 - x12).norm() < 1e-12);
    }
}
