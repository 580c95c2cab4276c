//! Spatial P1 discretization and the stochastic Galerkin system in TT format.

mod assembly;
mod mesh;
mod operator;
mod solver;

pub use assembly::{
    assemble_load, assemble_spatial, assemble_unconstrained, csr_mul, csr_to_dense, StiffnessSet,
};
pub use mesh::{Domain, Mesh};
pub use operator::{assemble_operator_dense, assemble_operator_tt, assemble_rhs, ORACLE_LIMIT};
pub use solver::{
    solve_dense, GalerkinSystemTt, IterationRecord, MeanPreconditioner, Pcg, SolveResult, TtSolver, ROUNDING_RATIO,
    STALL_WINDOW,
};
