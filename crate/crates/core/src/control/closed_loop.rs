use std::sync::Arc;

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use super::low_level::{low_level, ControlCommand, LowLevelGains};
use super::mpc::{mpc_step, MpcSettings, TrackingCosts};
use super::reference::ReferenceTrajectory;
use super::ControlError;
use crate::actuation::RotorLag;
use crate::contact::{contact_force, point_force_wrench, ContactParams};
use crate::dynamics::{com, forward_kinematics, frame_velocity, symplectic_step, State};
use crate::ocp::{Dynamics, MultibodyDynamics, Solution};
use crate::robot::{CANONICAL_NQ, CANONICAL_NV};
use crate::spatial::euler_rpy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// Integration step [s].
    pub dt: f64,
    /// First-order rotor response time [s] (estimate).
    pub rotor_time_constant: f64,
    /// The run aborts when any base coordinate leaves `±position_limit` [m].
    pub position_limit: f64,
    pub contact: ContactParams,
    /// Substeps per step while the contact point is within `contact_margin`
    /// of the ground. The foot is light, so explicit contact damping needs a
    /// finer step than the rest of the plant.
    pub contact_substeps: usize,
    /// Height above the ground below which substepping starts [m].
    pub contact_margin: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            rotor_time_constant: 0.02,
            position_limit: 50.0,
            contact: ContactParams::default(),
            contact_substeps: 10,
            contact_margin: 0.02,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("dt must be > 0".into());
        }
        if !(self.rotor_time_constant >= 0.0) {
            return Err("rotor_time_constant must be >= 0".into());
        }
        if !(self.position_limit > 0.0) {
            return Err("position_limit must be > 0".into());
        }
        if self.contact_substeps == 0 || !(self.contact_margin >= 0.0) {
            return Err("contact_substeps must be >= 1 and contact_margin >= 0".into());
        }
        self.contact.validate()
    }
}

/// The simulated robot: rigid-body model with lagged rotors and compliant
/// ground contact at the end effector.
#[derive(Debug, Clone)]
pub struct Plant {
    pub dynamics: MultibodyDynamics,
    pub params: PlantParams,
}

/// Solver statistics attached to each log row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Telemetry {
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Anything that turns the measured state into actuator commands once per plant step.
pub trait Controller {
    fn command(
        &mut self,
        tick: usize,
        t: f64,
        state: &State,
        contact_force: f64,
    ) -> Result<(ControlCommand, Telemetry), ControlError>;
}

/// Replays a fixed command.
#[derive(Debug, Clone)]
pub struct OpenLoop(pub ControlCommand);

impl Controller for OpenLoop {
    fn command(&mut self, _: usize, _: f64, _: &State, _: f64) -> Result<(ControlCommand, Telemetry), ControlError> {
        Ok((self.0.clone(), Telemetry::default()))
    }
}

/// Receding-horizon tracking of a reference, with the low-level loop
/// running every plant step between solves.
pub struct MpcController {
    dynamics: Arc<MultibodyDynamics>,
    reference: ReferenceTrajectory,
    settings: MpcSettings,
    costs: TrackingCosts,
    gains: LowLevelGains,
    solve_every: usize,
    plant_dt: f64,
    solution: Option<Solution>,
    solved_at: f64,
}

impl MpcController {
    pub fn new(
        dynamics: Arc<MultibodyDynamics>,
        reference: ReferenceTrajectory,
        settings: MpcSettings,
        costs: TrackingCosts,
        gains: LowLevelGains,
        plant_dt: f64,
    ) -> Self {
        let solve_every = ((1.0 / (settings.rate * plant_dt)).round() as usize).max(1);
        Self { dynamics, reference, settings, costs, gains, solve_every, plant_dt, solution: None, solved_at: 0.0 }
    }

    pub fn solution(&self) -> Option<&Solution> {
        self.solution.as_ref()
    }
}

impl Controller for MpcController {
    fn command(
        &mut self,
        tick: usize,
        t: f64,
        state: &State,
        _: f64,
    ) -> Result<(ControlCommand, Telemetry), ControlError> {
        let x = self.dynamics.join(state);
        if tick.is_multiple_of(self.solve_every) || self.solution.is_none() {
            let dyn_: Arc<dyn Dynamics> = self.dynamics.clone();
            let sol = mpc_step(&dyn_, &x, t, &self.reference, self.solution.as_ref(), &self.settings, &self.costs)?;
            self.solution = Some(sol);
            self.solved_at = t;
        }
        let sol = self.solution.as_ref().expect("solved");
        let since = (t - self.solved_at).max(0.0);
        debug_assert!(since < self.solve_every as f64 * self.plant_dt + 1e-9);
        let cmd = low_level(&self.dynamics, sol, self.settings.dt, &x, &self.gains, since);
        Ok((cmd, Telemetry { cost: sol.cost, iterations: sol.iterations, converged: sol.converged }))
    }
}

/// One plant step as recorded in the log, in the canonical layout of the
/// full platform (absent coordinates are zero, the quaternion identity).
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q: [f64; CANONICAL_NQ],
    pub v: [f64; CANONICAL_NV],
    pub thrusts: [f64; 6],
    pub torques: [f64; 2],
    pub ee_position: [f64; 3],
    pub ee_velocity: [f64; 3],
    /// Roll, pitch, yaw of the base.
    pub euler: [f64; 3],
    pub com_z: f64,
    pub contact_force: f64,
    pub thrust_saturated: bool,
    pub torque_saturated: bool,
    pub mpc_cost: f64,
    pub mpc_iterations: usize,
    pub mpc_converged: bool,
}

impl LogRow {
    pub const COLUMNS: [&'static str; 42] = [
        "t",
        "x",
        "y",
        "z",
        "qx",
        "qy",
        "qz",
        "qw",
        "q1",
        "q2",
        "vx",
        "vy",
        "vz",
        "wx",
        "wy",
        "wz",
        "dq1",
        "dq2",
        "thrust1",
        "thrust2",
        "thrust3",
        "thrust4",
        "thrust5",
        "thrust6",
        "tau1",
        "tau2",
        "ee_x",
        "ee_y",
        "ee_z",
        "ee_vx",
        "ee_vy",
        "ee_vz",
        "roll",
        "pitch",
        "yaw",
        "com_z",
        "contact_fz",
        "thrust_sat",
        "torque_sat",
        "mpc_cost",
        "mpc_iter",
        "mpc_converged",
    ];
    pub const WIDTH: usize = Self::COLUMNS.len();

    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::WIDTH);
        out.push(self.t);
        out.extend(self.q);
        out.extend(self.v);
        out.extend(self.thrusts);
        out.extend(self.torques);
        out.extend(self.ee_position);
        out.extend(self.ee_velocity);
        out.extend(self.euler);
        out.push(self.com_z);
        out.push(self.contact_force);
        out.push(self.thrust_saturated as u8 as f64);
        out.push(self.torque_saturated as u8 as f64);
        out.push(self.mpc_cost);
        out.push(self.mpc_iterations as f64);
        out.push(self.mpc_converged as u8 as f64);
        out
    }

    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != Self::WIDTH {
            return None;
        }
        let arr = |start: usize, n: usize| v[start..start + n].to_vec();
        let fixed = |s: usize| -> [f64; 3] { [v[s], v[s + 1], v[s + 2]] };
        Some(Self {
            t: v[0],
            q: arr(1, 9).try_into().ok()?,
            v: arr(10, 8).try_into().ok()?,
            thrusts: arr(18, 6).try_into().ok()?,
            torques: [v[24], v[25]],
            ee_position: fixed(26),
            ee_velocity: fixed(29),
            euler: fixed(32),
            com_z: v[35],
            contact_force: v[36],
            thrust_saturated: v[37] != 0.0,
            torque_saturated: v[38] != 0.0,
            mpc_cost: v[39],
            mpc_iterations: v[40] as usize,
            mpc_converged: v[41] != 0.0,
        })
    }

    pub fn base_position(&self) -> [f64; 3] {
        [self.q[0], self.q[1], self.q[2]]
    }

    /// Base angular velocity in the body frame.
    pub fn angular_velocity(&self) -> [f64; 3] {
        [self.v[3], self.v[4], self.v[5]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Base left the position box or a value became non-finite.
    Diverged {
        t: f64,
        reason: String,
    },
    /// The controller failed; the log stops at the failing step.
    ControllerFailed {
        t: f64,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub dt: f64,
    pub rows: Vec<LogRow>,
    pub status: RunStatus,
}

impl RunLog {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

fn base_out_of_bounds(q: &[f64; CANONICAL_NQ], limit: f64) -> bool {
    q[..3].iter().any(|p| p.abs() > limit)
}

/// Lockstep simulation for `duration` seconds.
///
/// Each tick the controller sees the current state and contact force, its
/// command is logged with that state, the rotors respond through their lag,
/// and the plant advances one step. The first command also initializes the
/// rotor state, so a run starts with the rotors spun up.
pub fn run_closed_loop(plant: &Plant, controller: &mut dyn Controller, initial: State, duration: f64) -> RunLog {
    let dt = plant.params.dt;
    let d = &plant.dynamics;
    let model = &d.robot.model;
    let ee = d.robot.end_effector;
    let ee_body = model.frames[ee].body;
    let steps = (duration / dt).round() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut state = initial;
    let mut lag: Option<RotorLag> = None;
    let mut status = RunStatus::Completed;
    for tick in 0..=steps {
        let t = tick as f64 * dt;
        if !state.is_finite() {
            status = RunStatus::Diverged { t, reason: "non-finite state".into() };
            break;
        }
        let (cq, cv) = d.robot.canonical(&state.q, &state.v);
        if base_out_of_bounds(&cq, plant.params.position_limit) {
            status = RunStatus::Diverged { t, reason: "base left the position box".into() };
            break;
        }
        let poses = forward_kinematics(model, &state.q);
        let ee_pose = poses.frames[ee];
        let (ee_vel, _) = frame_velocity(model, &state.q, &state.v, ee);
        let f_contact = contact_force(&ee_pose.translation, &ee_vel, &plant.params.contact);
        let (cmd, tele) = match controller.command(tick, t, &state, f_contact.z) {
            Ok(c) => c,
            Err(e) => {
                status = RunStatus::ControllerFailed { t, reason: e.to_string() };
                break;
            }
        };
        let rot = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(cq[6], cq[3], cq[4], cq[5]));
        let mut torques = [0.0; 2];
        for (slot, &tau) in torques.iter_mut().zip(cmd.torques.iter()) {
            *slot = tau;
        }
        rows.push(LogRow {
            t,
            q: cq,
            v: cv,
            thrusts: cmd.thrusts.into(),
            torques,
            ee_position: ee_pose.translation.into(),
            ee_velocity: ee_vel.into(),
            euler: euler_rpy(rot.to_rotation_matrix().matrix()).into(),
            com_z: com(model, &state.q).0.z,
            contact_force: f_contact.z,
            thrust_saturated: cmd.thrust_saturated,
            torque_saturated: cmd.torque_saturated,
            mpc_cost: tele.cost,
            mpc_iterations: tele.iterations,
            mpc_converged: tele.converged,
        });
        if tick == steps {
            break;
        }
        let rotors = lag.get_or_insert_with(|| RotorLag::new(plant.params.rotor_time_constant, cmd.thrusts));
        let applied: Vector6<f64> = rotors.step(&cmd.thrusts, dt);
        let (tau, fext) = d.robot.actuation_forces(&d.layout, &applied, cmd.torques.as_slice());
        let near_ground = ee_pose.translation.z < plant.params.contact.ground_height + plant.params.contact_margin;
        let substeps = if near_ground { plant.params.contact_substeps } else { 1 };
        let h = dt / substeps as f64;
        let mut f_sub = f_contact;
        let mut poses_sub = poses;
        for sub in 0..substeps {
            if sub > 0 {
                poses_sub = forward_kinematics(model, &state.q);
                let (v, _) = frame_velocity(model, &state.q, &state.v, ee);
                f_sub = contact_force(&poses_sub.frames[ee].translation, &v, &plant.params.contact);
            }
            let mut fext = fext.clone();
            if f_sub != nalgebra::Vector3::zeros() {
                fext[ee_body] +=
                    point_force_wrench(&poses_sub.bodies[ee_body], &poses_sub.frames[ee].translation, &f_sub);
            }
            match symplectic_step(model, &state, &tau, Some(&fext), h) {
                Ok(next) => state = next,
                Err(e) => {
                    status = RunStatus::Diverged { t, reason: e.to_string() };
                    break;
                }
            }
        }
        if status != RunStatus::Completed {
            break;
        }
    }
    RunLog { dt, rows, status }
}
