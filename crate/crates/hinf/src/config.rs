//! Shared numerical thresholds.
//!
//! Every rank, axis and definiteness decision in the crate goes through one
//! of these knobs so that the case dispatch is deterministic and documented.

/// Tolerance bundle shared by all modules.
///
/// The defaults follow standard dense-numerics practice for the desk-scale
/// problems this crate targets (state dimension up to a few tens):
///
/// * `axis_factor` — an eigenvalue `z` counts as imaginary-axis when
///   `|Re z| <= axis_factor * max(1, ||A||)`;
/// * `cluster_factor` — eigenvalues within `cluster_factor * max(1, ||A||)`
///   of each other are grouped into one invariant zero with multiplicity;
/// * `rank_factor` — singular values below
///   `rank_factor * n * ||M|| * eps` are treated as zero in rank tests;
/// * `pd_floor` — relative floor on eigenvalues before a matrix counts as
///   positive definite for inverse square roots.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub axis_factor: f64,
    pub cluster_factor: f64,
    pub rank_factor: f64,
    pub pd_floor: f64,
    /// Residual ceiling for null-vector extraction, relative to the
    /// Frobenius norm of the system matrix.
    pub residual_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            axis_factor: 1e-8,
            cluster_factor: 1e-7,
            rank_factor: 1e3,
            pd_floor: 1e-10,
            residual_factor: 1e-8,
        }
    }
}

impl Tolerances {
    /// Axis-classification threshold for a matrix of spectral scale `norm_a`.
    pub fn tau_axis(&self, norm_a: f64) -> f64 {
        self.axis_factor * norm_a.max(1.0)
    }

    /// Eigenvalue clustering threshold.
    pub fn tau_cluster(&self, norm_a: f64) -> f64 {
        self.cluster_factor * norm_a.max(1.0)
    }

    /// Numerical-rank threshold for an `n`-dimensional problem of scale
    /// `norm_m`.
    pub fn tau_rank(&self, n: usize, norm_m: f64) -> f64 {
        self.rank_factor * (n.max(1) as f64) * norm_m.max(1.0) * f64::EPSILON
    }

    /// Positive-definiteness floor for a symmetric matrix `p`.
    pub fn tau_pd(&self, trace: f64, dim: usize) -> f64 {
        self.pd_floor * (trace.abs() / dim.max(1) as f64).max(1.0)
    }
}
