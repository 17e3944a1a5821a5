//! The closed form for the infimal H-infinity level `gamma*`.
//!
//! The core quantity is `hat_gamma`, the maximum eigenvalue of the
//! symmetric matrix
//!
//! ```text
//!      [ O            F^-1/2 J' G^-1/2   F^-1/2 H1^1/2   O             ]
//! E =  [ G^-1/2 J F^-1/2    O            O               G^-1/2 H2^1/2 ]
//!      [ H1^1/2 F^-1/2      O            O               O             ]
//!      [ O            H2^1/2 G^-1/2      O               O             ]
//! ```
//!
//! built from the unstable-zero Gramians. Imaginary-axis zeros add the
//! terms `|s_j' b1 / f_j + d11|` (control channel) and
//! `|t_j' c1 / g_j + d11|` (measurement channel); a vanishing `d12` or
//! `d21` adds `|d11|`, the closed-loop feedthrough floor. `gamma*` is the
//! maximum of everything present.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{HinfError, Result};
use crate::lyap::{build_gramians, inv_sqrt, sym_sqrt, GramianSet};
use crate::plant::{
    channel_realization, check_detectable, check_stabilizable, transfer_eval, Channel,
    Realization, SPoint, StateSpacePlant,
};
use crate::zeros::{zero_data, ImagPair, ZeroData};

/// Which branch of the closed form produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseId {
    /// `d12 != 0`, `d21 != 0`, all zeros unstable and off the axis.
    Case1,
    /// `d12 != 0`, `d21 != 0`, some stable zeros, none on the axis.
    Case2,
    /// `d12 != 0`, `d21 != 0`, zeros on the imaginary axis present.
    Case3,
    /// `d12 = 0` or `d21 = 0`.
    Case4,
    /// A channel is identically zero; `gamma* = ||G_zw||_inf`.
    ZwFallback,
}

/// Numerical by-products worth reporting alongside `gamma*`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub zu_residual: f64,
    pub yw_residual: f64,
    pub gramian_residual: f64,
    pub s_condition_zu: Option<f64>,
    pub s_condition_yw: Option<f64>,
    pub e_dim: usize,
    pub k1: usize,
    pub k2: usize,
    pub m1: usize,
    pub m2: usize,
    /// Worst disagreement between the null-vector axis terms and
    /// `|G_zw(lambda_j)|` where the latter is defined.
    pub axis_transfer_mismatch: f64,
}

/// `gamma*` with every candidate component that entered the maximum.
#[derive(Debug, Clone, Serialize)]
pub struct GammaResult {
    pub gamma_star: f64,
    pub case_id: CaseId,
    pub hat_gamma: f64,
    /// `(omega, |s' b1 / f + d11|)` per control-channel axis zero.
    pub imag_terms_zu: Vec<(f64, f64)>,
    /// `(omega, |t' c1 / g + d11|)` per measurement-channel axis zero.
    pub imag_terms_yw: Vec<(f64, f64)>,
    pub feedthrough_term: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// The symmetric matrix whose maximum eigenvalue is `hat_gamma`.
#[derive(Debug, Clone)]
pub struct EMatrix(pub DMatrix<f64>);

impl EMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Assembles `E` from a Gramian set. Degenerate sides (no unstable zeros
/// in a channel) collapse to the smaller two-block forms.
pub fn build_e(g: &GramianSet, tol: &Tolerances) -> Result<EMatrix> {
    let (k1, k2) = (g.k1(), g.k2());
    let dim = 2 * (k1 + k2);
    let mut e = DMatrix::zeros(dim, dim);
    if dim == 0 {
        return Ok(EMatrix(e));
    }
    let map_pd = |err: HinfError| match err {
        HinfError::NotPd(v) => {
            HinfError::IllConditioned(format!("Gramian nearly singular (min eig {v:.3e})"))
        }
        other => other,
    };
    let fi = inv_sqrt(&g.f_plus, tol).map_err(map_pd)?;
    let gi = inv_sqrt(&g.g_plus, tol).map_err(map_pd)?;
    let h1s = sym_sqrt(&g.h1_plus, tol)?;
    let h2s = sym_sqrt(&g.h2_plus, tol)?;

    let b21 = &gi * &g.j_plus * &fi; // k2 x k1
    let b31 = &h1s * &fi; // k1 x k1
    let b42 = &h2s * &gi; // k2 x k2

    let (o1, o2, o3, o4) = (0, k1, k1 + k2, 2 * k1 + k2);
    set_block(&mut e, o2, o1, &b21);
    set_block(&mut e, o1, o2, &b21.transpose());
    set_block(&mut e, o3, o1, &b31);
    set_block(&mut e, o1, o3, &b31.transpose());
    set_block(&mut e, o4, o2, &b42);
    set_block(&mut e, o2, o4, &b42.transpose());
    Ok(EMatrix(e))
}

fn set_block(m: &mut DMatrix<f64>, row: usize, col: usize, b: &DMatrix<f64>) {
    m.view_mut((row, col), (b.nrows(), b.ncols())).copy_from(b);
}

/// Maximum eigenvalue of `E`; zero for the empty matrix.
pub fn hat_gamma(e: &EMatrix) -> f64 {
    if e.dim() == 0 {
        return 0.0;
    }
    let sym = (&e.0 + e.0.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.max().max(0.0)
}

/// Axis-zero correction terms for both channels.
///
/// Each control-channel pair contributes `|s' b1 / f + d11|`; each
/// measurement-channel pair contributes `|t' c1 / g + d11|`. When the
/// zero is not an eigenvalue of `A` the term equals `|G_zw(lambda)|`;
/// the worst mismatch between the two routes is returned for diagnostics.
pub fn imag_corrections(
    zu_pairs: &[ImagPair],
    yw_pairs: &[ImagPair],
    plant: &StateSpacePlant,
    tol: &Tolerances,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>, f64)> {
    let zw = channel_realization(plant, Channel::Zw);
    let mut mismatch: f64 = 0.0;
    let mut term_of = |pairs: &[ImagPair], rhs: &nalgebra::DVector<f64>| -> Result<Vec<(f64, f64)>> {
        pairs
            .iter()
            .map(|pair| {
                let fmag = pair.f.norm();
                if fmag < tol.tau_pd(1.0, 1) {
                    return Err(HinfError::NullVectorDegenerate(fmag));
                }
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..rhs.len() {
                    dot += pair.s[i] * rhs[i];
                }
                let term = (dot / pair.f + plant.d11).norm();
                if let Ok(g) = transfer_eval(&zw, SPoint::Finite(pair.value)) {
                    mismatch = mismatch.max((g.norm() - term).abs());
                }
                Ok((pair.value.im, term))
            })
            .collect()
    };
    let zu_terms = term_of(zu_pairs, &plant.b1)?;
    let yw_terms = term_of(yw_pairs, &plant.c1)?;
    Ok((zu_terms, yw_terms, mismatch))
}

/// The closed form: invariant zeros, Gramians, one symmetric eigenvalue
/// problem, and the case-dependent corrections.
pub fn gamma_star(plant: &StateSpacePlant, tol: &Tolerances) -> Result<GammaResult> {
    plant.validate()?;
    if !check_stabilizable(&plant.a, &plant.b2, tol) {
        return Err(HinfError::NotStabilizable);
    }
    if !check_detectable(&plant.a, &plant.c2, tol) {
        return Err(HinfError::NotDetectable);
    }

    let zu = channel_realization(plant, Channel::Zu);
    let yw = channel_realization(plant, Channel::Yw);
    if zu.is_identically_zero(tol) || yw.is_identically_zero(tol) {
        let zw = channel_realization(plant, Channel::Zw);
        let norm = hinf_norm_grid(&zw, &GridSpec::default());
        return Ok(GammaResult {
            gamma_star: norm,
            case_id: CaseId::ZwFallback,
            hat_gamma: 0.0,
            imag_terms_zu: Vec::new(),
            imag_terms_yw: Vec::new(),
            feedthrough_term: None,
            diagnostics: Diagnostics::default(),
        });
    }

    let zd_zu = zero_data(&zu, tol)?;
    let zd_yw = zero_data(&yw, tol)?;
    gamma_star_from_zero_data(plant, &zd_zu, &zd_yw, tol)
}

/// Same as [`gamma_star`] but with precomputed zero data (used by the
/// oracle pipeline to share work).
pub fn gamma_star_from_zero_data(
    plant: &StateSpacePlant,
    zd_zu: &ZeroData,
    zd_yw: &ZeroData,
    tol: &Tolerances,
) -> Result<GammaResult> {
    for pair in zd_zu.imag_pairs.iter().chain(zd_yw.imag_pairs.iter()) {
        if pair.multiplicity > 1 {
            return Err(HinfError::Unsupported(
                "repeated imaginary-axis invariant zero".to_string(),
            ));
        }
        if pair.value.im == 0.0 {
            return Err(HinfError::Unsupported(
                "invariant zero at the origin".to_string(),
            ));
        }
    }

    let grams = build_gramians(zd_zu, zd_yw, plant, tol)?;
    let struct_tol = 1e-11
        * (1.0 + plant.a.norm() + plant.b1.norm() + plant.c1.norm() + plant.d11.abs());
    let empty = grams.k1() == 0 && grams.k2() == 0;
    let hat = if empty || grams.is_trivially_zero(struct_tol) {
        0.0
    } else {
        hat_gamma(&build_e(&grams, tol)?)
    };

    let (imag_terms_zu, imag_terms_yw, axis_mismatch) =
        imag_corrections(&zd_zu.imag_pairs, &zd_yw.imag_pairs, plant, tol)?;

    let case4 = plant.d12 == 0.0 || plant.d21 == 0.0;
    let feedthrough_term = if case4 { Some(plant.d11.abs()) } else { None };

    let mut gamma = hat;
    for (_, t) in imag_terms_zu.iter().chain(imag_terms_yw.iter()) {
        gamma = gamma.max(*t);
    }
    if let Some(t) = feedthrough_term {
        gamma = gamma.max(t);
    }

    let case_id = if case4 {
        CaseId::Case4
    } else if !imag_terms_zu.is_empty() || !imag_terms_yw.is_empty() {
        CaseId::Case3
    } else if zd_zu.k_stable() + zd_yw.k_stable() > 0 {
        CaseId::Case2
    } else {
        CaseId::Case1
    };

    Ok(GammaResult {
        gamma_star: gamma,
        case_id,
        hat_gamma: hat,
        imag_terms_zu,
        imag_terms_yw,
        feedthrough_term,
        diagnostics: Diagnostics {
            zu_residual: zd_zu.residual,
            yw_residual: zd_yw.residual,
            gramian_residual: grams.residual,
            s_condition_zu: zd_zu.s_condition,
            s_condition_yw: zd_yw.s_condition,
            e_dim: 2 * (grams.k1() + grams.k2()),
            k1: grams.k1(),
            k2: grams.k2(),
            m1: zd_zu.m_imag(),
            m2: zd_yw.m_imag(),
            axis_transfer_mismatch: axis_mismatch,
        },
    })
}

/// Sensitivity-function limit for the plant `(A, b, c)`:
/// `max{ sqrt(1 + sigma_max^2(G^-1/2 J F^-1/2)), 1 }`.
///
/// Requires no invariant zeros on the axis (of either the plant or its
/// poles). Always equals `gamma_star` of the embedded generalized plant
/// with `w` entering both outputs directly.
pub fn sensitivity_limit(
    a: &DMatrix<f64>,
    b: &nalgebra::DVector<f64>,
    c: &nalgebra::DVector<f64>,
    tol: &Tolerances,
) -> Result<f64> {
    let plant = sensitivity_plant(a, b, c)?;
    if !check_stabilizable(&plant.a, &plant.b2, tol) {
        return Err(HinfError::NotStabilizable);
    }
    if !check_detectable(&plant.a, &plant.c2, tol) {
        return Err(HinfError::NotDetectable);
    }
    let zu = channel_realization(&plant, Channel::Zu);
    let yw = channel_realization(&plant, Channel::Yw);
    let zd_zu = zero_data(&zu, tol)?;
    let zd_yw = zero_data(&yw, tol)?;
    if zd_zu.m_imag() + zd_yw.m_imag() > 0 {
        return Err(HinfError::Unsupported(
            "sensitivity limit assumes no imaginary-axis zeros".to_string(),
        ));
    }
    let grams = build_gramians(&zd_zu, &zd_yw, &plant, tol)?;
    if grams.k1() == 0 || grams.k2() == 0 {
        // No unstable zero/pole interaction: sigma = 0 (empty product).
        return Ok(1.0);
    }
    let fi = inv_sqrt(&grams.f_plus, tol)?;
    let gi = inv_sqrt(&grams.g_plus, tol)?;
    let sigma = (gi * &grams.j_plus * fi).svd(false, false).singular_values.max();
    Ok((1.0 + sigma * sigma).sqrt().max(1.0))
}

/// The generalized plant whose closed loop is the sensitivity function.
pub fn sensitivity_plant(
    a: &DMatrix<f64>,
    b: &nalgebra::DVector<f64>,
    c: &nalgebra::DVector<f64>,
) -> Result<StateSpacePlant> {
    StateSpacePlant::new(
        a.clone(),
        nalgebra::DVector::zeros(a.nrows()),
        b.clone(),
        c.clone(),
        c.clone(),
        1.0,
        0.0,
        1.0,
    )
}

/// Frequency-grid parameters for the fallback norm.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub points: usize,
    pub decades_low: f64,
    pub decades_high: f64,
    pub refine_iters: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 400,
            decades_low: 1e-4,
            decades_high: 1e4,
            refine_iters: 80,
        }
    }
}

/// Supremum of `|G(j w)|` over a logarithmic grid with golden-section
/// refinement around the peak. This is the documented ~1e-6-accurate
/// fallback, not a certified norm computation.
pub fn hinf_norm_grid(r: &Realization, grid: &GridSpec) -> f64 {
    let scale = r.scale().max(1.0);
    let eval = |w: f64| -> f64 {
        match transfer_eval(r, SPoint::Finite(Complex64::new(0.0, w))) {
            Ok(g) => g.norm(),
            Err(_) => f64::INFINITY,
        }
    };
    let mut best_w = 0.0;
    let mut best = eval(0.0).max(r.d.abs());
    let lo = (grid.decades_low * scale).ln();
    let hi = (grid.decades_high * scale).ln();
    let m = grid.points.max(2);
    let mut ws = Vec::with_capacity(m);
    for i in 0..m {
        let t = i as f64 / (m - 1) as f64;
        ws.push((lo + t * (hi - lo)).exp());
    }
    for &w in &ws {
        let v = eval(w);
        if v > best {
            best = v;
            best_w = w;
        }
    }
    if !best.is_finite() {
        return best;
    }
    // Golden-section around the best sample (bracket by grid neighbours).
    let idx = ws.iter().position(|&w| w == best_w);
    let (mut a, mut b) = match idx {
        Some(i) => (
            if i == 0 { 0.0 } else { ws[i - 1] },
            if i + 1 < ws.len() { ws[i + 1] } else { ws[i] * 2.0 },
        ),
        None => (0.0, ws[1]),
    };
    let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
    for _ in 0..grid.refine_iters {
        let x1 = a + phi * (b - a);
        let x2 = b - phi * (b - a);
        if eval(x1) > eval(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let w = 0.5 * (a + b);
    best.max(eval(w))
}
