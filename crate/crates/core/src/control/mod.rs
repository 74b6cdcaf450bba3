//! Planner, receding-horizon controller, low-level loop and the closed-loop
//! simulator that ties them to the plant.

mod closed_loop;
mod jump;
mod low_level;
mod mpc;
mod planner;
mod reference;

pub use closed_loop::{
    run_closed_loop, Controller, LogRow, MpcController, OpenLoop, Plant, PlantParams, RunLog, RunStatus, Telemetry,
};
pub use jump::{JumpController, JumpParams};
pub use low_level::{low_level, ControlCommand, LowLevelGains};
pub use mpc::{mpc_step, shift_guess, MpcSettings, TrackingCosts};
pub use planner::{
    equilibrium_control, hover_state, plan, plan_with_solution, ControlWeights, PlanSettings, StateWeights, Task,
};
pub use reference::ReferenceTrajectory;

use crate::dynamics::DynamicsError;
use crate::ocp::{OcpError, SolveStatus};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("planner did not converge ({status:?} after {iterations} iterations, cost {cost})")]
    Planning { status: SolveStatus, iterations: usize, cost: f64 },
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("non-finite state")]
    NonFiniteState,
    #[error(transparent)]
    Ocp(#[from] OcpError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
