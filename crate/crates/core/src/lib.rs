//! Implicit Lagrangian solver for the multimaterial compressible Euler
//! equations with a stiffened-gas closure.

// Stencil kernels index several arrays at once, and `!(x > 0.0)` also
// rejects NaN.
#![allow(
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod eos;
pub mod explicit;
pub mod harness;
pub mod implicit;
pub mod mesh;
pub mod problems;
pub mod riemann;
pub mod timestepping;

pub use eos::{internal_energy, pressure_from_conserved, wavespeed_sq, EosError, MaterialParams};
pub use implicit::{
    implicit_euler_step, thomas_solve, Boundary, DiffusionOrder, SolverKnobs, State,
    StepDiagnostics, StepError,
};
pub use mesh::{Mesh, MeshError};
pub use riemann::{sample, solve_star, RiemannError, RiemannState, StarState, WaveKind};
