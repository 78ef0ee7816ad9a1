//! Eigenvalue solvers and spectrum reports.

pub mod linear;
pub mod nonlinear;
pub mod report;

pub use nonlinear::{
    rayleigh, solve_first_positive, solve_ground, solve_linear_spectrum, solve_nonlinear_higher, weak_residual,
    Eigenpair, NonlinearSolver, SolverConfig,
};
pub use report::{counting_function, Method, SpectrumEntry, SpectrumReport};
