//! Approximation scheme for the surrogate design problem.

pub mod constants;
pub mod dp;
pub mod grid;
pub mod solve;

pub use constants::{derive_constants, pair_contraction, uniform_design_count, DerivedConstants};
pub use dp::{
    backtrack, find_feasible_state, round_weight, round_weights, DpProblem, DpStorage, DpTable, FeasibilityCheck,
    RoundedWeights, State, DEFAULT_MEMORY_BUDGET,
};
pub use grid::{tilt_axis, LazyAxis, TiltGrid};
pub use solve::{run_afptas, run_afptas_with, GuaranteeStatus, SolveCertificate, SolveOptions, Strategy};
