//! LMI assembly, dense SDP solving, gamma-bisection and facial
//! reduction: the verification oracle for the closed form.

pub mod assemble;
pub mod bisect;
pub mod completion;
pub mod polish;
pub mod probe;
pub mod problem;
pub mod solver;

pub use assemble::{
    assemble_dual, assemble_lmi_full, assemble_reduced, facial_reduce_dual, axis_pattern_violation,
    infinite_pattern_violation, stable_pattern_violation, DualKind, GammaLmi, PerpKind, ReductionStep,
    ReductionLevel, ReductionReport,
};
pub use bisect::{bisect_gamma, bisect_gamma_lmi, BisectOptions, BisectResult, OracleLevel};
pub use completion::{completed_matrix, matrix_completion};
pub use polish::project_feasible;
pub use probe::{strict_feasibility_probe, strict_feasibility_probe_lmi, ProbeOutcome};
pub use problem::{ConstraintRow, LmiProblem, SdpProblem, SdpSolution, Sense, SolveStatus};
pub use solver::{lmi_solve, sdp_solve, LmiSolution, SolveOptions};
