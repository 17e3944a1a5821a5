//! Exact infimal H-infinity norm for SISO output-feedback control.
//!
//! Given a generalized plant with scalar disturbance, control, performance
//! and measurement channels, the infimal closed-loop H-infinity level
//! `gamma*` admits a closed form built from the invariant zeros of the
//! control and measurement channels: a maximum-eigenvalue term over
//! Lyapunov Gramians of the unstable zero data, corrections for zeros on
//! the imaginary axis, and a feedthrough floor when a channel loses its
//! direct term.
//!
//! The crate has two independent routes to the same number:
//!
//! * [`gamma::gamma_star`] — the closed form (invariant zeros, null
//!   vectors, Lyapunov equations, one symmetric eigenvalue problem);
//! * [`sdp::bisect_gamma`] — a self-contained dense SDP solver running a
//!   gamma-bisection over the underlying LMI feasibility problem.
//!
//! The second exists to check the first; [`suite`] runs both over seeded
//! random plants and reports the gaps.

pub mod config;
pub mod error;
pub mod gamma;
pub mod lyap;
pub mod plant;
pub mod sdp;
pub mod suite;
pub mod zeros;

pub use config::Tolerances;
pub use error::HinfError;
pub use gamma::{gamma_star, sensitivity_limit, CaseId, GammaResult};
pub use plant::{Channel, Realization, SPoint, StateSpacePlant};
pub use zeros::{InvariantZero, ZeroClass, ZeroData};
