//! Optimal control: multiple-shooting problems and an iLQR solver.

mod cost;
mod dynamics;
mod problem;
mod solver;

pub use cost::{total_cost, CostDerivatives, CostTerm};
pub use dynamics::{Dynamics, LinearDynamics, MultibodyDynamics};
pub use problem::{dynamics_jacobians, linearize, rollout, Linearization, OcProblem, OcpError, FD_EPS};
pub use solver::{solve, Solution, SolveStatus, SolverSettings};
