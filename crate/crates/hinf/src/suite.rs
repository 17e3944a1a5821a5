//! Seeded random plant generation and batch closed-form-vs-oracle
//! verification.
//!
//! Plants are drawn per `(seed, index)` with rejection until the target
//! structural class is hit, so a suite is reproducible from its seed
//! alone and every index is independent of the others (which makes the
//! batch embarrassingly parallel).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{HinfError, Result};
use crate::gamma::{gamma_star, CaseId};
use crate::plant::{channel_realization, Channel, StateSpacePlant};
use crate::sdp::{bisect_gamma, BisectOptions};
use crate::zeros::zero_data;

/// Structural class a generated plant must land in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTarget {
    /// Biproper, all invariant zeros strictly unstable.
    Case1,
    /// Biproper, stable zeros present, none on the axis.
    Case2,
    /// Biproper with an exact axis zero pair in the control channel.
    Case3,
    /// One vanishing feedthrough.
    Case4,
    /// Both channels minimum-phase (zero limit, short-circuit path).
    AllStable,
}

impl CaseTarget {
    pub fn label(self) -> &'static str {
        match self {
            CaseTarget::Case1 => "case1",
            CaseTarget::Case2 => "case2",
            CaseTarget::Case3 => "case3",
            CaseTarget::Case4 => "case4",
            CaseTarget::AllStable => "all-stable",
        }
    }

    /// Round-robin pattern used by the default suites.
    pub fn cycle(index: usize) -> CaseTarget {
        match index % 4 {
            0 => CaseTarget::Case1,
            1 => CaseTarget::Case2,
            2 => CaseTarget::Case3,
            _ => CaseTarget::Case4,
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one value per call keeps the stream simple.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn randn_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| standard_normal(rng))
}

fn randn_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| standard_normal(rng))
}

fn pick_feedthrough<R: Rng>(rng: &mut R) -> f64 {
    [0.5, -0.5, 1.0, -1.0][rng.random_range(0..4)]
}

fn pick_d11<R: Rng>(rng: &mut R) -> f64 {
    [0.0, 0.5, -0.5, 1.0, -1.0][rng.random_range(0..5)]
}

struct ChannelShape {
    stable: usize,
    unstable: usize,
    axis: usize,
}

fn channel_shape(plant: &StateSpacePlant, ch: Channel, tol: &Tolerances) -> Result<ChannelShape> {
    let zd = zero_data(&channel_realization(plant, ch), tol)?;
    Ok(ChannelShape {
        stable: zd.k_stable(),
        unstable: zd.k_unstable(),
        axis: zd.m_imag(),
    })
}

/// Multiplies `(s - root)` into a monic coefficient list (descending
/// powers).
fn push_root(poly: &mut Vec<f64>, root: f64) {
    let mut next = vec![0.0; poly.len() + 1];
    for (i, &c) in poly.iter().enumerate() {
        next[i] += c;
        next[i + 1] -= root * c;
    }
    *poly = next;
}

/// Draws one plant candidate for the target class.
fn draw_plant<R: Rng>(rng: &mut R, n: usize, target: CaseTarget) -> Option<StateSpacePlant> {
    match target {
        CaseTarget::Case3 => {
            if n < 2 {
                return None;
            }
            // Control channel in controllable canonical form with an exact
            // (s^2 + w^2) numerator factor; poles random real, away from
            // the axis.
            let omega = 0.4 + 1.6 * rng.random::<f64>();
            let mut den = vec![1.0];
            for _ in 0..n {
                let root =
                    0.7 * standard_normal(rng) + if rng.random::<bool>() { 0.9 } else { -0.9 };
                push_root(&mut den, root);
            }
            let mut num = vec![1.0, 0.0, omega * omega];
            for _ in 0..(n - 2) {
                push_root(&mut num, 0.8 * standard_normal(rng));
            }
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n - 1 {
                a[(i, i + 1)] = 1.0;
            }
            for j in 0..n {
                a[(n - 1, j)] = -den[n - j];
            }
            let mut b2 = DVector::zeros(n);
            b2[n - 1] = 1.0;
            let mut c1 = DVector::zeros(n);
            for j in 0..n {
                c1[j] = num[n - j] - den[n - j];
            }
            let b1 = randn_vector(rng, n);
            let c2 = randn_vector(rng, n);
            StateSpacePlant::new(a, b1, b2, c1, c2, pick_d11(rng), 1.0, pick_feedthrough(rng))
                .ok()
        }
        CaseTarget::Case4 => {
            // Companion-form control channel so the Markov parameters
            // below the relative degree are exact zeros: the structural
            // chain length is a property of the plant, not of rounding.
            let r1 = if n >= 3 && rng.random::<bool>() { 2 } else { 1 };
            let mut den = vec![1.0];
            for _ in 0..n {
                let root =
                    0.8 * standard_normal(rng) + if rng.random::<bool>() { 0.6 } else { -0.6 };
                push_root(&mut den, root);
            }
            let mut num = vec![1.0];
            for _ in 0..(n - r1) {
                let root =
                    0.8 * standard_normal(rng) + if rng.random::<bool>() { 0.5 } else { -0.5 };
                push_root(&mut num, root);
            }
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n - 1 {
                a[(i, i + 1)] = 1.0;
            }
            for j in 0..n {
                a[(n - 1, j)] = -den[n - j];
            }
            let mut b2 = DVector::zeros(n);
            b2[n - 1] = 1.0;
            let mut c1 = DVector::zeros(n);
            let deg = num.len() - 1; // = n - r1
            for (idx, &coeff) in num.iter().enumerate() {
                // coefficient of s^{deg-idx} goes to state deg-idx.
                c1[deg - idx] = coeff;
            }
            let b1 = randn_vector(rng, n);
            let c2 = randn_vector(rng, n);
            let d11 = pick_d11(rng);
            let d21 = pick_feedthrough(rng);
            let plant = StateSpacePlant::new(a, b1, b2, c1, c2, d11, 0.0, d21).ok()?;
            if rng.random::<bool>() {
                Some(plant)
            } else {
                // Swap to the measurement-side variant: the transposed
                // plant has d21 = 0 with the same exact chain structure.
                Some(transpose_swap(&plant))
            }
        }
        _ => {
            let shift = match target {
                CaseTarget::Case1 => 0.7,
                CaseTarget::AllStable => -1.6,
                _ => {
                    if rng.random::<bool>() {
                        0.35
                    } else {
                        -0.35
                    }
                }
            };
            let a = randn_matrix(rng, n) * 0.8 + DMatrix::identity(n, n) * shift;
            let b1 = randn_vector(rng, n);
            let b2 = randn_vector(rng, n);
            let c1 = randn_vector(rng, n);
            let c2 = randn_vector(rng, n);
            let (d12, d21) = (pick_feedthrough(rng), pick_feedthrough(rng));
            StateSpacePlant::new(a, b1, b2, c1, c2, pick_d11(rng), d12, d21).ok()
        }
    }
}

/// Swaps the roles of control and measurement: `(A, b1, b2, c1, c2,
/// d11, d12, d21) -> (A', c1, c2, b1, b2, d11, d21, d12)`. The control
/// channel of the result is the transposed measurement channel of the
/// input, so exact chain structure carries over to the other side.
fn transpose_swap(p: &StateSpacePlant) -> StateSpacePlant {
    StateSpacePlant::new(
        p.a.transpose(),
        p.c1.clone(),
        p.c2.clone(),
        p.b1.clone(),
        p.b2.clone(),
        p.d11,
        p.d21,
        p.d12,
    )
    .expect("transposed plant is well formed")
}

/// Checks whether a drawn plant lands in the target class.
pub fn matches_target(plant: &StateSpacePlant, target: CaseTarget, tol: &Tolerances) -> bool {
    use crate::plant::{check_detectable, check_stabilizable};
    if !check_stabilizable(&plant.a, &plant.b2, tol) || !check_detectable(&plant.a, &plant.c2, tol)
    {
        return false;
    }
    let zu = channel_realization(plant, Channel::Zu);
    let yw = channel_realization(plant, Channel::Yw);
    if zu.is_identically_zero(tol) || yw.is_identically_zero(tol) {
        return false;
    }
    let (s_zu, s_yw) = match (
        channel_shape(plant, Channel::Zu, tol),
        channel_shape(plant, Channel::Yw, tol),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return false,
    };
    // Keep the suite at desk scale: reject plants whose limit is huge,
    // whose zero data is badly conditioned, or whose unstable-zero
    // Gramians are nearly singular (near-coincident zeros make the LMI
    // feasibility boundary flat to below solver resolution, so
    // absolute-tolerance verification is meaningless there).
    match gamma_star(plant, tol) {
        Ok(r) => {
            if !r.gamma_star.is_finite() || r.gamma_star > 6.0 {
                return false;
            }
            if r.diagnostics.s_condition_zu.unwrap_or(1.0) > 1e7
                || r.diagnostics.s_condition_yw.unwrap_or(1.0) > 1e7
            {
                return false;
            }
        }
        Err(_) => return false,
    }
    match (
        zero_data(&channel_realization(plant, Channel::Zu), tol),
        zero_data(&channel_realization(plant, Channel::Yw), tol),
    ) {
        (Ok(a), Ok(b)) => {
            if let Ok(g) = crate::lyap::build_gramians(&a, &b, plant, tol) {
                let cond = |m: &nalgebra::DMatrix<f64>| -> f64 {
                    if m.nrows() == 0 {
                        return 1.0;
                    }
                    let sv = m.clone().svd(false, false).singular_values;
                    if sv.min() > 0.0 {
                        sv.max() / sv.min()
                    } else {
                        f64::INFINITY
                    }
                };
                if cond(&g.f_plus) > 1e4 || cond(&g.g_plus) > 1e4 {
                    return false;
                }
            } else {
                return false;
            }
        }
        _ => return false,
    }
    match target {
        CaseTarget::Case1 => {
            plant.d12 != 0.0
                && plant.d21 != 0.0
                && s_zu.stable == 0
                && s_yw.stable == 0
                && s_zu.axis == 0
                && s_yw.axis == 0
                && s_zu.unstable + s_yw.unstable > 0
        }
        CaseTarget::Case2 => {
            plant.d12 != 0.0
                && plant.d21 != 0.0
                && s_zu.axis == 0
                && s_yw.axis == 0
                && s_zu.stable + s_yw.stable > 0
                && s_zu.unstable + s_yw.unstable > 0
        }
        CaseTarget::Case3 => {
            plant.d12 != 0.0
                && plant.d21 != 0.0
                && s_zu.axis + s_yw.axis > 0
                && axis_zeros_simple(plant, tol)
        }
        CaseTarget::Case4 => {
            (plant.d12 == 0.0 || plant.d21 == 0.0) && s_zu.axis == 0 && s_yw.axis == 0
        }
        CaseTarget::AllStable => {
            plant.d12 != 0.0
                && plant.d21 != 0.0
                && s_zu.unstable == 0
                && s_yw.unstable == 0
                && s_zu.axis == 0
                && s_yw.axis == 0
        }
    }
}

fn axis_zeros_simple(plant: &StateSpacePlant, tol: &Tolerances) -> bool {
    for ch in [Channel::Zu, Channel::Yw] {
        match zero_data(&channel_realization(plant, ch), tol) {
            Ok(zd) => {
                for pair in &zd.imag_pairs {
                    if pair.multiplicity > 1 || pair.value.im == 0.0 {
                        return false;
                    }
                }
            }
            Err(_) => return false,
        }
    }
    true
}

/// Deterministically generates the `index`-th plant of a suite.
pub fn generate_plant(
    seed: u64,
    index: usize,
    n: usize,
    target: CaseTarget,
    tol: &Tolerances,
) -> Result<StateSpacePlant> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index as u64),
    );
    for _ in 0..3000 {
        if let Some(plant) = draw_plant(&mut rng, n, target) {
            if matches_target(&plant, target, tol) {
                return Ok(plant);
            }
        }
    }
    Err(HinfError::Unsupported(format!(
        "no {} plant found for seed {seed} index {index} after 3000 draws",
        target.label()
    )))
}

/// One row of a verification run.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub index: usize,
    pub n: usize,
    pub target: &'static str,
    pub case_id: Option<CaseId>,
    pub gamma_closed: Option<f64>,
    pub gamma_oracle: Option<f64>,
    pub gap: Option<f64>,
    pub closed_ms: f64,
    pub oracle_ms: f64,
    pub conclusive: bool,
    pub skipped: Option<String>,
}

impl VerifyRow {
    pub fn csv_header() -> &'static str {
        "index,n,case,gamma_closed,gamma_oracle,gap,closed_ms,oracle_ms,conclusive,skipped"
    }

    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: &Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
        format!(
            "{},{},{},{},{},{},{:.3},{:.3},{},{}",
            self.index,
            self.n,
            self.case_id
                .map_or_else(|| self.target.to_string(), |c| format!("{c:?}")),
            fmt_opt(&self.gamma_closed),
            fmt_opt(&self.gamma_oracle),
            fmt_opt(&self.gap),
            self.closed_ms,
            self.oracle_ms,
            self.conclusive,
            self.skipped
                .as_deref()
                .map_or_else(String::new, |s| format!("skipped: {s}")),
        )
    }
}

/// Suite parameters.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub seed: u64,
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub bisect: BisectOptions,
    pub tol: Tolerances,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            count: 20,
            n_min: 2,
            n_max: 6,
            bisect: BisectOptions::default(),
            tol: Tolerances::default(),
        }
    }
}

impl SuiteSpec {
    /// State dimension for the `index`-th plant. All-unstable-zero
    /// plants (the first class) only exist at desk-scale limits for
    /// small `n`, so that class cycles over the two smallest dimensions.
    pub fn plant_dim(&self, index: usize) -> usize {
        let target = CaseTarget::cycle(index);
        if matches!(target, CaseTarget::Case1) {
            self.n_min + (index / 4) % 2.min(self.n_max - self.n_min + 1)
        } else {
            let span = self.n_max.saturating_sub(self.n_min) + 1;
            self.n_min + (index / 4) % span
        }
    }
}

/// Runs the closed form and the bisection oracle on one plant. Errors
/// come back as strings so batch rows can carry the skip reason.
pub fn verify_plant(
    plant: &StateSpacePlant,
    bisect: &BisectOptions,
    tol: &Tolerances,
) -> (
    std::result::Result<(f64, CaseId), String>,
    std::result::Result<(f64, bool), String>,
    f64,
    f64,
) {
    let t0 = std::time::Instant::now();
    let closed = gamma_star(plant, tol)
        .map(|r| (r.gamma_star, r.case_id))
        .map_err(|e| e.to_string());
    let closed_ms = t0.elapsed().as_secs_f64() * 1e3;
    let t1 = std::time::Instant::now();
    let oracle = bisect_gamma(plant, 0.0, bisect.hi_init, bisect, tol)
        .map(|r| (r.gamma, r.conclusive))
        .map_err(|e| e.to_string());
    let oracle_ms = t1.elapsed().as_secs_f64() * 1e3;
    (closed, oracle, closed_ms, oracle_ms)
}

fn run_index(spec: &SuiteSpec, index: usize) -> VerifyRow {
    let target = CaseTarget::cycle(index);
    let n = spec.plant_dim(index);
    let plant = match generate_plant(spec.seed, index, n, target, &spec.tol) {
        Ok(p) => p,
        Err(e) => {
            return VerifyRow {
                index,
                n,
                target: target.label(),
                case_id: None,
                gamma_closed: None,
                gamma_oracle: None,
                gap: None,
                closed_ms: 0.0,
                oracle_ms: 0.0,
                conclusive: false,
                skipped: Some(e.to_string()),
            }
        }
    };
    let (closed, oracle, closed_ms, oracle_ms) = verify_plant(&plant, &spec.bisect, &spec.tol);
    let skipped = match (&closed, &oracle) {
        (Err(e), _) => Some(e.clone()),
        (_, Err(e)) => Some(e.clone()),
        _ => None,
    };
    VerifyRow {
        index,
        n,
        target: target.label(),
        case_id: closed.as_ref().ok().map(|&(_, c)| c),
        gamma_closed: closed.as_ref().ok().map(|&(g, _)| g),
        gamma_oracle: oracle.as_ref().ok().map(|&(g, _)| g),
        gap: match (&closed, &oracle) {
            (Ok((gc, _)), Ok((go, _))) => Some((gc - go).abs()),
            _ => None,
        },
        closed_ms,
        oracle_ms,
        conclusive: oracle.as_ref().ok().map(|&(_, c)| c).unwrap_or(false),
        skipped,
    }
}

/// Sequential batch run.
pub fn run_suite_sequential(spec: &SuiteSpec) -> Vec<VerifyRow> {
    (0..spec.count).map(|i| run_index(spec, i)).collect()
}

/// Batch run, parallel across plants when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn run_suite(spec: &SuiteSpec) -> Vec<VerifyRow> {
    use rayon::prelude::*;
    (0..spec.count)
        .into_par_iter()
        .map(|i| run_index(spec, i))
        .collect()
}

/// Batch run (sequential fallback build).
#[cfg(not(feature = "parallel"))]
pub fn run_suite(spec: &SuiteSpec) -> Vec<VerifyRow> {
    run_suite_sequential(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let tol = Tolerances::default();
        let a = generate_plant(7, 3, 3, CaseTarget::Case2, &tol).unwrap();
        let b = generate_plant(7, 3, 3, CaseTarget::Case2, &tol).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn targets_are_hit() {
        let tol = Tolerances::default();
        for (i, target) in [
            CaseTarget::Case1,
            CaseTarget::Case2,
            CaseTarget::Case3,
            CaseTarget::Case4,
            CaseTarget::AllStable,
        ]
        .iter()
        .enumerate()
        {
            let plant = generate_plant(11, i, 3, *target, &tol).unwrap();
            assert!(matches_target(&plant, *target, &tol), "{target:?}");
        }
    }

    #[test]
    fn unstabilizable_plant_marks_skip_reason() {
        use nalgebra::dmatrix;
        let tol = Tolerances::default();
        let plant = StateSpacePlant::new(
            dmatrix![1.0],
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0]),
            0.0,
            1.0,
            1.0,
        )
        .unwrap();
        let (closed, _, _, _) = verify_plant(&plant, &BisectOptions::default(), &tol);
        assert!(closed.unwrap_err().contains("stabilizable"));
    }

    #[test]
    fn suite_rows_are_complete() {
        let spec = SuiteSpec {
            count: 4,
            ..SuiteSpec::default()
        };
        let rows = run_suite_sequential(&spec);
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.skipped.is_some() || r.gap.is_some(), "row {:?}", r);
        }
    }
}
