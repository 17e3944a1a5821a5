//! SISO generalized plants and their four transfer channels.
//!
//! The plant is
//!
//! ```text
//! dx/dt = A x + b1 w + b2 u
//!     z = c1' x + d11 w + d12 u
//!     y = c2' x + d21 w
//! ```
//!
//! with scalar `w`, `u`, `z`, `y`. Each of the four channels
//! (`zw`, `zu`, `yw`, `yu`) is a scalar rational function with a
//! realization built from views of the plant data.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{HinfError, Result};

/// SISO generalized plant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateSpacePlant {
    pub n: usize,
    #[serde(rename = "A", with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "vector")]
    pub b1: DVector<f64>,
    #[serde(with = "vector")]
    pub b2: DVector<f64>,
    #[serde(with = "vector")]
    pub c1: DVector<f64>,
    #[serde(with = "vector")]
    pub c2: DVector<f64>,
    pub d11: f64,
    pub d12: f64,
    pub d21: f64,
}

/// One scalar LTI realization `(A, b, c, d)` with transfer
/// `G(s) = c' (sI - A)^{-1} b + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

/// The four scalar channels of the generalized plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Zw,
    Zu,
    Yw,
    Yu,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::Zw => "zw",
            Channel::Zu => "zu",
            Channel::Yw => "yw",
            Channel::Yu => "yu",
        }
    }
}

/// Evaluation point on the extended imaginary axis / complex plane.
///
/// Infinity is a distinguished value, not a large float: `G(inf) = d`
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SPoint {
    Finite(Complex64),
    Infinity,
}

impl From<Complex64> for SPoint {
    fn from(s: Complex64) -> Self {
        SPoint::Finite(s)
    }
}

impl StateSpacePlant {
    /// Validates dimensions and finiteness.
    pub fn new(
        a: DMatrix<f64>,
        b1: DVector<f64>,
        b2: DVector<f64>,
        c1: DVector<f64>,
        c2: DVector<f64>,
        d11: f64,
        d12: f64,
        d21: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        let plant = Self { n, a, b1, b2, c1, c2, d11, d12, d21 };
        plant.validate()?;
        Ok(plant)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.a.nrows() != n || self.a.ncols() != n {
            return Err(HinfError::Dimension(format!(
                "A is {}x{}, expected {n}x{n}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        for (name, v) in [
            ("b1", &self.b1),
            ("b2", &self.b2),
            ("c1", &self.c1),
            ("c2", &self.c2),
        ] {
            if v.len() != n {
                return Err(HinfError::Dimension(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(HinfError::NonFinite(name.to_string()));
            }
        }
        if self.a.iter().any(|x| !x.is_finite()) {
            return Err(HinfError::NonFinite("A".to_string()));
        }
        for (name, x) in [("d11", self.d11), ("d12", self.d12), ("d21", self.d21)] {
            if !x.is_finite() {
                return Err(HinfError::NonFinite(name.to_string()));
            }
        }
        Ok(())
    }

    /// Parses the strict plant JSON schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let plant: StateSpacePlant =
            serde_json::from_str(text).map_err(|e| HinfError::Parse(e.to_string()))?;
        plant.validate()?;
        Ok(plant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plant serialization cannot fail")
    }
}

/// Realization of one channel.
///
/// The `yw` channel is returned in its transposed form
/// `(A', c2, b1, d21)`, which is the realization whose invariant-zero
/// data enters all downstream formulas.
pub fn channel_realization(plant: &StateSpacePlant, ch: Channel) -> Realization {
    match ch {
        Channel::Zw => Realization {
            a: plant.a.clone(),
            b: plant.b1.clone(),
            c: plant.c1.clone(),
            d: plant.d11,
        },
        Channel::Zu => Realization {
            a: plant.a.clone(),
            b: plant.b2.clone(),
            c: plant.c1.clone(),
            d: plant.d12,
        },
        Channel::Yw => Realization {
            a: plant.a.transpose(),
            b: plant.c2.clone(),
            c: plant.b1.clone(),
            d: plant.d21,
        },
        Channel::Yu => Realization {
            a: plant.a.clone(),
            b: plant.b2.clone(),
            c: plant.c2.clone(),
            d: 0.0,
        },
    }
}

impl Realization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Transposed realization `(A', c, b, d)`; its left null vectors are
    /// the right null vectors of `self`.
    pub fn transposed(&self) -> Realization {
        Realization {
            a: self.a.transpose(),
            b: self.c.clone(),
            c: self.b.clone(),
            d: self.d,
        }
    }

    /// `||A||_2` estimate used for scale-aware thresholds (Frobenius bound).
    pub fn scale(&self) -> f64 {
        self.a.norm()
    }

    /// True when all Markov parameters `c' A^k b` (k < n) and `d` vanish,
    /// i.e. the transfer function is identically zero.
    pub fn is_identically_zero(&self, tol: &Tolerances) -> bool {
        if self.d != 0.0 {
            return false;
        }
        let n = self.order();
        if n == 0 {
            return true;
        }
        let scale = self.b.norm() * self.c.norm();
        if scale == 0.0 {
            return true;
        }
        let mut v = self.b.clone();
        for _ in 0..n {
            let markov = self.c.dot(&v);
            if markov.abs() > tol.tau_rank(n, scale) {
                return false;
            }
            v = &self.a * v;
            // Guard against overflow for wildly scaled A.
            let norm = v.norm();
            if norm > 1e150 {
                v /= norm;
            }
        }
        true
    }
}

/// Transfer-function value `c' (sI - A)^{-1} b + d`.
///
/// Errors with [`HinfError::SingularResolvent`] when `sI - A` is singular
/// to working precision (condition worse than `1/sqrt(eps)`).
pub fn transfer_eval(r: &Realization, s: SPoint) -> Result<Complex64> {
    let s = match s {
        SPoint::Infinity => return Ok(Complex64::new(r.d, 0.0)),
        SPoint::Finite(s) => s,
    };
    let n = r.order();
    if n == 0 {
        return Ok(Complex64::new(r.d, 0.0));
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(-r.a[(i, j)], 0.0);
        }
        m[(i, i)] += s;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * f64::EPSILON.sqrt() {
        return Err(HinfError::SingularResolvent { re: s.re, im: s.im });
    }
    let b = DVector::<Complex64>::from_iterator(n, r.b.iter().map(|&x| Complex64::new(x, 0.0)));
    let x = m
        .lu()
        .solve(&b)
        .ok_or(HinfError::SingularResolvent { re: s.re, im: s.im })?;
    let mut acc = Complex64::new(r.d, 0.0);
    for i in 0..n {
        acc += Complex64::new(r.c[i], 0.0) * x[i];
    }
    Ok(acc)
}

/// PBH stabilizability test: `rank [A - sI, b] = n` for every eigenvalue
/// `s` of `A` with nonnegative real part.
pub fn check_stabilizable(a: &DMatrix<f64>, b: &DVector<f64>, tol: &Tolerances) -> bool {
    pbh_full_rank(a, b, tol)
}

/// PBH detectability test, the dual of stabilizability via `(A', c)`.
pub fn check_detectable(a: &DMatrix<f64>, c: &DVector<f64>, tol: &Tolerances) -> bool {
    pbh_full_rank(&a.transpose(), c, tol)
}

fn pbh_full_rank(a: &DMatrix<f64>, b: &DVector<f64>, tol: &Tolerances) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let norm_a = a.norm();
    let eigs = a
        .clone()
        .schur()
        .complex_eigenvalues();
    let tau_axis = tol.tau_axis(norm_a);
    for s in eigs.iter() {
        if s.re < -tau_axis {
            continue;
        }
        // Assemble [A - sI, b] as a complex n x (n+1) matrix.
        let mut m = DMatrix::<Complex64>::zeros(n, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(a[(i, j)], 0.0);
            }
            m[(i, i)] -= s;
            m[(i, n)] = Complex64::new(b[i], 0.0);
        }
        let sv = m.svd(false, false).singular_values;
        let tau = tol.tau_rank(n, norm_a.max(b.norm()));
        if sv.min() <= tau {
            return false;
        }
    }
    true
}

mod matrix_rows {
    //! Row-major nested-array (de)serialization for `DMatrix<f64>`.
    use nalgebra::DMatrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, ser: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DVector<f64>, D::Error> {
        let v: Vec<f64> = Vec::deserialize(de)?;
        Ok(DVector::from_vec(v))
    }
}
