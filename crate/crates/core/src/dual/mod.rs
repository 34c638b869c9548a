//! Dual formulation: lazy conjugate potential, boundary functional, objectives
//! and the ascent solver.

mod functional;
mod isotonic;
mod objective;
mod potential;
mod solver;

pub use functional::{
    adaptive_gauss_kronrod, boundary_functional, boundary_functional_derivative, minimize_boundary_functional,
};
pub use isotonic::{monotone_project, monotone_violation};
pub use objective::{
    boundary_residual, cell_assignment, cell_masses, dual_objective, duality_gap, primal_objective,
    transport_cloud, Evaluation, MASS_TOLERANCE,
};
pub use potential::{AffinePiece, DualPotential, FnPotential, Potential};
pub use solver::{project_boundary, solve_dual, DualState, SolveReport};
