//! Dense primal-dual interior-point solver (HKM direction, Mehrotra
//! predictor-corrector).
//!
//! Solves the pair
//!
//! ```text
//! (P)  min sum_i C_i . X_i + q'u    s.t.  sum_i A_ij . X_i + (Bu)_j = b_j,  X_i PSD
//! (D)  max b'y                      s.t.  C_i - sum_j y_j A_ij = S_i PSD,   B'y = q
//! ```
//!
//! with dense symmetric blocks. Everything here is sized for desk-scale
//! problems (blocks up to a few dozen, up to ~100 rows); the Schur
//! complement is formed densely and factored with partial-pivot LU.

use nalgebra::{DMatrix, DVector};

use crate::error::{HinfError, Result};
use crate::sdp::problem::{LmiProblem, SdpProblem, SdpSolution, Sense, SolveStatus};

/// Interior-point options.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Target relative gap and residuals.
    pub tol: f64,
    /// Exit is still classified `Optimal` below these (relative).
    pub accept_gap: f64,
    pub accept_feas: f64,
    /// Largest admissible PSD block.
    pub block_cap: usize,
    /// Multipliers on the heuristic initial primal/dual scales.
    pub init_primal_scale: f64,
    pub init_dual_scale: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 120,
            tol: 1e-10,
            accept_gap: 1e-7,
            accept_feas: 1e-8,
            block_cap: 60,
            init_primal_scale: 1.0,
            init_dual_scale: 1.0,
        }
    }
}

/// Internal standard-form data (always a minimization).
struct ConicData {
    dims: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    a: Vec<Vec<DMatrix<f64>>>,
    b: DVector<f64>,
    bfree: DMatrix<f64>,
    q: DVector<f64>,
}

impl ConicData {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn p(&self) -> usize {
        self.q.len()
    }

    fn nu(&self) -> f64 {
        self.dims.iter().sum::<usize>() as f64
    }
}

/// Solves a primal-form problem; `Max` senses are negated internally.
pub fn sdp_solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    problem.validate()?;
    if let Some(&d) = problem.block_dims.iter().find(|&&d| d > opts.block_cap) {
        return Err(HinfError::Solver(format!(
            "block size {d} exceeds cap {}",
            opts.block_cap
        )));
    }
    let sign = match problem.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let data = ConicData {
        dims: problem.block_dims.clone(),
        c: problem.objective.iter().map(|ci| ci * sign).collect(),
        a: problem
            .constraints
            .iter()
            .map(|row| row.mats.clone())
            .collect(),
        b: DVector::from_iterator(
            problem.constraints.len(),
            problem.constraints.iter().map(|r| r.rhs),
        ),
        bfree: {
            let m = problem.constraints.len();
            let p = problem.free_dim();
            DMatrix::from_fn(m, p, |j, k| problem.constraints[j].free[k])
        },
        q: &problem.free_objective * sign,
    };
    let raw = ipm(&data, opts)?;
    Ok(SdpSolution {
        blocks: raw.x,
        free: raw.u,
        dual: raw.y.clone(),
        slacks: raw.s,
        primal_objective: sign * raw.pobj,
        dual_objective: sign * raw.dobj,
        gap: raw.gap,
        primal_residual: raw.rp,
        dual_residual: raw.rd,
        status: raw.status,
        iterations: raw.iterations,
    })
}

/// Solution of an LMI-form problem.
#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub y: DVector<f64>,
    pub objective: f64,
    /// Slack blocks `sum y_j L_j - L_0`.
    pub slacks: Vec<DMatrix<f64>>,
    /// Primal certificate blocks (`X` of the embedded pair): on a probe
    /// with negative margin these form the reducing direction.
    pub certificate: Vec<DMatrix<f64>>,
    pub certificate_objective: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Solves `min d'y` s.t. `sum_j y_j L_j - L_0` PSD per block.
pub fn lmi_solve(problem: &LmiProblem, opts: &SolveOptions) -> Result<LmiSolution> {
    if let Some(&d) = problem.block_dims.iter().find(|&&d| d > opts.block_cap) {
        return Err(HinfError::Solver(format!(
            "block size {d} exceeds cap {}",
            opts.block_cap
        )));
    }
    // Variable scaling keeps the Schur complement well conditioned.
    let m = problem.n_vars();
    let scales: Vec<f64> = (0..m)
        .map(|j| {
            problem.coeff[j]
                .iter()
                .map(|l| l.norm())
                .fold(0.0_f64, f64::max)
                .max(1e-12)
        })
        .collect();
    let data = ConicData {
        dims: problem.block_dims.clone(),
        c: problem.l0.iter().map(|l| -l).collect(),
        a: (0..m)
            .map(|j| problem.coeff[j].iter().map(|l| -l / scales[j]).collect())
            .collect(),
        b: DVector::from_iterator(m, (0..m).map(|j| -problem.d[j] / scales[j])),
        bfree: DMatrix::zeros(m, 0),
        q: DVector::zeros(0),
    };
    let raw = ipm(&data, opts)?;
    let y = DVector::from_iterator(m, (0..m).map(|j| raw.y[j] / scales[j]));
    let slacks = problem.slacks(&y);
    Ok(LmiSolution {
        objective: problem.d.dot(&y),
        y,
        slacks,
        certificate: raw.x,
        certificate_objective: -raw.pobj,
        gap: raw.gap,
        status: raw.status,
        iterations: raw.iterations,
    })
}

struct RawSolution {
    x: Vec<DMatrix<f64>>,
    u: DVector<f64>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    pobj: f64,
    dobj: f64,
    gap: f64,
    rp: f64,
    rd: f64,
    status: SolveStatus,
    iterations: usize,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest step in `[0, 1]` keeping `X + alpha D` PSD, given PD `X`.
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return 1.0;
    }
    let chol = match x.clone().cholesky() {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    let t1 = l
        .clone()
        .solve_lower_triangular(d)
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    let w = l
        .solve_lower_triangular(&t1.transpose())
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    let lam_min = sym(&w).symmetric_eigen().eigenvalues.min();
    if lam_min >= -1e-14 {
        1.0
    } else {
        (-1.0 / lam_min).min(1.0)
    }
}

fn ipm(data: &ConicData, opts: &SolveOptions) -> Result<RawSolution> {
    let m = data.m();
    let p = data.p();
    let nb = data.dims.len();
    if m == 0 {
        return Err(HinfError::Solver("problem has no constraints".to_string()));
    }
    let nu = data.nu().max(1.0);

    let norm_c = data.c.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let norm_a = data
        .a
        .iter()
        .flat_map(|row| row.iter().map(|m| m.norm()))
        .fold(0.0_f64, f64::max);
    let norm_b = data.b.amax().max(1e-12);

    let xi = (norm_b / norm_a.max(1.0)).max(10.0) * opts.init_primal_scale;
    let eta = norm_c.max(norm_a).max(10.0) * opts.init_dual_scale;

    let mut x: Vec<DMatrix<f64>> = data
        .dims
        .iter()
        .map(|&d| DMatrix::identity(d, d) * xi)
        .collect();
    let mut s: Vec<DMatrix<f64>> = data
        .dims
        .iter()
        .map(|&d| DMatrix::identity(d, d) * eta)
        .collect();
    let mut y = DVector::zeros(m);
    let mut u = DVector::zeros(p);

    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut stalls = 0;

    let inner = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 { a.dot(b) };

    let mut best: Option<RawSolution> = None;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        // Residuals.
        let mut rp = data.b.clone();
        for j in 0..m {
            for i in 0..nb {
                rp[j] -= inner(&data.a[j][i], &x[i]);
            }
            for k in 0..p {
                rp[j] -= data.bfree[(j, k)] * u[k];
            }
        }
        let mut rq = data.q.clone();
        for k in 0..p {
            for j in 0..m {
                rq[k] -= data.bfree[(j, k)] * y[j];
            }
        }
        let rd: Vec<DMatrix<f64>> = (0..nb)
            .map(|i| {
                let mut r = data.c[i].clone() - &s[i];
                for j in 0..m {
                    r -= &data.a[j][i] * y[j];
                }
                r
            })
            .collect();
        let gap: f64 = (0..nb).map(|i| inner(&x[i], &s[i])).sum();
        let mu = gap / nu;

        let pobj: f64 = (0..nb).map(|i| inner(&data.c[i], &x[i])).sum::<f64>() + data.q.dot(&u);
        let dobj: f64 = data.b.dot(&y);
        let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
        let rp_rel = rp.norm() / (1.0 + data.b.norm());
        let rd_rel = rd.iter().map(|r| r.norm()).fold(0.0_f64, f64::max)
            / (1.0 + norm_c);
        let rq_rel = rq.norm() / (1.0 + data.q.norm());
        let feas = rp_rel.max(rd_rel).max(rq_rel);

        let snapshot = |status: SolveStatus| RawSolution {
            x: x.clone(),
            u: u.clone(),
            y: y.clone(),
            s: s.clone(),
            pobj,
            dobj,
            gap,
            rp: rp_rel,
            rd: rd_rel.max(rq_rel),
            status,
            iterations,
        };

        if std::env::var_os("HINF_IPM_TRACE").is_some() {
            eprintln!(
                "  it {iter:3}  mu {mu:9.2e}  gap {rel_gap:9.2e}  rp {rp_rel:9.2e}  rd {rd_rel:9.2e}  pobj {pobj:+.6e}  dobj {dobj:+.6e}"
            );
        }
        if rel_gap <= opts.tol && feas <= opts.tol.max(1e-12) {
            let mut sol = snapshot(SolveStatus::Optimal);
            sol.status = SolveStatus::Optimal;
            return Ok(sol);
        }
        // Track the best usable iterate for degraded exits.
        let usable = rel_gap <= opts.accept_gap && feas <= opts.accept_feas;
        if usable {
            let replace = match &best {
                None => true,
                Some(b) => rel_gap.max(feas) < b.gap / (1.0 + b.pobj.abs() + b.dobj.abs()),
            };
            if replace {
                best = Some(snapshot(SolveStatus::Optimal));
            }
        }

        // Per-block S^{-1}.
        let mut s_inv: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        for i in 0..nb {
            match s[i].clone().cholesky() {
                Some(ch) => s_inv.push(ch.inverse()),
                None => {
                    status = SolveStatus::NearSingular;
                    break;
                }
            }
        }
        if s_inv.len() != nb {
            break;
        }

        // Schur complement M_jk = sum_i <A_ij, X_i A_ik S_i^{-1}>.
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..nb {
            if data.dims[i] == 0 {
                continue;
            }
            let g: Vec<DMatrix<f64>> = (0..m)
                .map(|k| &x[i] * &data.a[k][i] * &s_inv[i])
                .collect();
            for j in 0..m {
                for k in 0..m {
                    schur[(j, k)] += inner(&data.a[j][i], &g[k]);
                }
            }
        }
        let schur = sym(&schur);
        let reg = 1e-13 * (1.0 + schur.diagonal().sum() / m as f64);
        let mut kkt = DMatrix::zeros(m + p, m + p);
        kkt.view_mut((0, 0), (m, m))
            .copy_from(&(&schur + DMatrix::identity(m, m) * reg));
        if p > 0 {
            kkt.view_mut((0, m), (m, p)).copy_from(&data.bfree);
            kkt.view_mut((m, 0), (p, m))
                .copy_from(&data.bfree.transpose());
        }
        let lu = kkt.clone().lu();

        // Direction solve for a given complementarity target, with
        // iterative refinement: the KKT system gets very ill conditioned
        // as mu shrinks and a single LU solve loses the last digits that
        // the feasibility residuals need.
        let solve_dir = |rc: &[DMatrix<f64>]| -> Option<(DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
            let mut g = DVector::<f64>::zeros(m);
            for i in 0..nb {
                if data.dims[i] == 0 {
                    continue;
                }
                let core = sym(&((&rc[i] - &x[i] * &rd[i]) * &s_inv[i]));
                for j in 0..m {
                    g[j] += inner(&data.a[j][i], &core);
                }
            }
            let mut rhs = DVector::zeros(m + p);
            for j in 0..m {
                rhs[j] = rp[j] - g[j];
            }
            for k in 0..p {
                rhs[m + k] = rq[k];
            }
            let mut sol = lu.solve(&rhs)?;
            for _ in 0..2 {
                let err = &rhs - &kkt * &sol;
                if err.norm() <= 1e-14 * rhs.norm().max(1.0) {
                    break;
                }
                let corr = lu.solve(&err)?;
                sol += corr;
            }
            let dy = sol.rows(0, m).into_owned();
            let du = sol.rows(m, p).into_owned();
            let mut ds = Vec::with_capacity(nb);
            let mut dx = Vec::with_capacity(nb);
            for i in 0..nb {
                let mut dsi = rd[i].clone();
                for j in 0..m {
                    dsi -= &data.a[j][i] * dy[j];
                }
                let dxi = sym(&((&rc[i] - &x[i] * &dsi) * &s_inv[i]));
                ds.push(dsi);
                dx.push(dxi);
            }
            Some((dy, du, dx, ds))
        };

        // Predictor.
        let rc_aff: Vec<DMatrix<f64>> = (0..nb).map(|i| -(&x[i] * &s[i])).collect();
        let Some((_dy_a, _du_a, dx_a, ds_a)) = solve_dir(&rc_aff) else {
            status = SolveStatus::NearSingular;
            break;
        };
        let ap_a = (0..nb).map(|i| max_step(&x[i], &dx_a[i])).fold(1.0_f64, f64::min);
        let ad_a = (0..nb).map(|i| max_step(&s[i], &ds_a[i])).fold(1.0_f64, f64::min);
        let mut gap_aff = 0.0;
        for i in 0..nb {
            gap_aff += inner(&(&x[i] + &dx_a[i] * ap_a), &(&s[i] + &ds_a[i] * ad_a));
        }
        let mut sigma = ((gap_aff / gap).powi(3)).clamp(1e-10, 0.99999);
        // Centering safeguard: when feasibility lags the gap, spend the
        // iteration on centrality so the residuals can catch up.
        if feas > 10.0 * rel_gap {
            sigma = sigma.max(0.5);
        }

        // Corrector.
        let rc: Vec<DMatrix<f64>> = (0..nb)
            .map(|i| {
                DMatrix::identity(data.dims[i], data.dims[i]) * (sigma * mu)
                    - &x[i] * &s[i]
                    - &dx_a[i] * &ds_a[i]
            })
            .collect();
        let Some((dy, du, dx, ds)) = solve_dir(&rc) else {
            status = SolveStatus::NearSingular;
            break;
        };

        let eta_step = 0.99;
        let mut ap = eta_step * (0..nb).map(|i| max_step(&x[i], &dx[i])).fold(1.0_f64, f64::min);
        let mut ad = eta_step * (0..nb).map(|i| max_step(&s[i], &ds[i])).fold(1.0_f64, f64::min);
        ap = ap.min(1.0);
        ad = ad.min(1.0);

        // Apply with positive-definiteness backoff.
        let mut applied = false;
        for _ in 0..8 {
            let x_new: Vec<DMatrix<f64>> =
                (0..nb).map(|i| sym(&(&x[i] + &dx[i] * ap))).collect();
            let s_new: Vec<DMatrix<f64>> =
                (0..nb).map(|i| sym(&(&s[i] + &ds[i] * ad))).collect();
            let ok = x_new
                .iter()
                .chain(s_new.iter())
                .all(|mblk| mblk.nrows() == 0 || mblk.clone().cholesky().is_some());
            if ok {
                x = x_new;
                s = s_new;
                y += &dy * ad;
                u += &du * ad;
                applied = true;
                break;
            }
            ap *= 0.5;
            ad *= 0.5;
        }
        if !applied || ap.min(ad) < 1e-9 {
            stalls += 1;
            if stalls >= 6 {
                status = SolveStatus::NearSingular;
                break;
            }
        } else {
            stalls = 0;
        }
    }

    // Final classification using the last iterate (or best usable one).
    let mut rp = data.b.clone();
    for j in 0..m {
        for i in 0..nb {
            rp[j] -= data.a[j][i].dot(&x[i]);
        }
        for k in 0..p {
            rp[j] -= data.bfree[(j, k)] * u[k];
        }
    }
    let mut rq = data.q.clone();
    for k in 0..p {
        for j in 0..m {
            rq[k] -= data.bfree[(j, k)] * y[j];
        }
    }
    let rd_final: f64 = (0..nb)
        .map(|i| {
            let mut r = data.c[i].clone() - &s[i];
            for j in 0..m {
                r -= &data.a[j][i] * y[j];
            }
            r.norm()
        })
        .fold(0.0_f64, f64::max);
    let gap: f64 = (0..nb).map(|i| x[i].dot(&s[i])).sum();
    let pobj: f64 = (0..nb).map(|i| data.c[i].dot(&x[i])).sum::<f64>() + data.q.dot(&u);
    let dobj: f64 = data.b.dot(&y);
    let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
    let rp_rel = rp.norm() / (1.0 + data.b.norm());
    let rd_rel = rd_final / (1.0 + norm_c);
    let rq_rel = rq.norm() / (1.0 + data.q.norm());
    let feas = rp_rel.max(rd_rel).max(rq_rel);
    if rel_gap <= opts.accept_gap && feas <= opts.accept_feas {
        status = SolveStatus::Optimal;
    } else if let Some(b) = best {
        return Ok(b);
    }
    Ok(RawSolution {
        x,
        u,
        y,
        s,
        pobj,
        dobj,
        gap,
        rp: rp_rel,
        rd: rd_rel.max(rq_rel),
        status,
        iterations,
    })
}
