use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::closed_loop::{Controller, Telemetry};
use super::low_level::ControlCommand;
use super::ControlError;
use crate::actuation::{allocate, WrenchCommand};
use crate::contact::ContactParams;
use crate::dynamics::{frame_pose, State};
use crate::ocp::MultibodyDynamics;

/// Feedforward jump on the vertical guide: constant collective thrust, a
/// timed knee torque to push off, then joint PD holding the leg shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JumpParams {
    /// Collective thrust as a fraction of the total weight.
    pub thrust_fraction: f64,
    /// Knee torque during push-off [N·m].
    pub leg_torque: f64,
    /// How long the knee torque is applied [s].
    pub torque_duration: f64,
    /// Time standing before the push [s].
    pub settle_time: f64,
    /// Half the knee bend of the crouched leg [rad]; the foot sits under the shoulder.
    pub crouch: f64,
    pub kp: f64,
    pub kd: f64,
    /// Collective thrust fraction once the foot is back on the ground.
    pub landing_thrust_fraction: f64,
}

impl Default for JumpParams {
    fn default() -> Self {
        Self {
            thrust_fraction: 0.9,
            leg_torque: 2.5,
            torque_duration: 0.18,
            settle_time: 0.3,
            crouch: 1.0,
            kp: 5.0,
            kd: 0.5,
            landing_thrust_fraction: 0.5,
        }
    }
}

impl JumpParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.thrust_fraction) {
            return Err("thrust_fraction must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.landing_thrust_fraction) {
            return Err("landing_thrust_fraction must be in [0, 1]".into());
        }
        if !(self.torque_duration > 0.0) {
            return Err("torque_duration must be > 0".into());
        }
        if !(self.settle_time >= 0.0) || !(self.crouch > 0.0 && self.crouch < std::f64::consts::FRAC_PI_2) {
            return Err("settle_time must be >= 0 and crouch in (0, pi/2)".into());
        }
        if !(self.kp >= 0.0 && self.kd >= 0.0 && self.leg_torque.is_finite()) {
            return Err("kp, kd must be >= 0 and leg_torque finite".into());
        }
        Ok(())
    }

    /// Crouched leg angles `(shoulder, knee)`.
    pub fn crouched(&self) -> [f64; 2] {
        [self.crouch, -2.0 * self.crouch]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Stance,
    Push,
    /// Push finished, foot possibly still on the ground.
    Extended,
    Airborne,
    Landed,
}

#[derive(Debug, Clone)]
pub struct JumpController {
    dynamics: MultibodyDynamics,
    params: JumpParams,
    phase: Phase,
    hold: [f64; 2],
}

impl JumpController {
    pub fn new(dynamics: MultibodyDynamics, params: JumpParams) -> Self {
        let hold = params.crouched();
        Self { dynamics, params, phase: Phase::Stance, hold }
    }

    /// Crouched at rest with the foot at its static penetration under the
    /// weight left over by the thrust.
    pub fn initial_state(dynamics: &MultibodyDynamics, params: &JumpParams, contact: &ContactParams) -> State {
        let robot = &dynamics.robot;
        let q0 = robot.configuration(Vector3::zeros(), params.crouched());
        let foot = frame_pose(&robot.model, &q0, robot.end_effector).translation.z;
        let load = (1.0 - params.thrust_fraction) * robot.model.total_mass() * robot.params.gravity;
        let depth = load / contact.stiffness;
        let q = robot.configuration(Vector3::new(0.0, 0.0, contact.ground_height - depth - foot), params.crouched());
        State::at_rest(&robot.model, q)
    }

    fn collective(&self, fraction: f64) -> WrenchCommand {
        let m = self.dynamics.robot.model.total_mass();
        WrenchCommand::new(fraction * m * self.dynamics.robot.params.gravity, 0.0, 0.0, 0.0)
    }
}

impl Controller for JumpController {
    fn command(
        &mut self,
        _tick: usize,
        t: f64,
        state: &State,
        contact_force: f64,
    ) -> Result<(ControlCommand, Telemetry), ControlError> {
        if !state.is_finite() {
            return Err(ControlError::NonFiniteState);
        }
        let p = &self.params;
        let push_end = p.settle_time + p.torque_duration;
        let qi = self.dynamics.robot.arm_q_indices();
        let vi = self.dynamics.robot.arm_indices();
        let (a, da) = ([state.q[qi[0]], state.q[qi[1]]], [state.v[vi[0]], state.v[vi[1]]]);
        self.phase = match self.phase {
            Phase::Stance if t >= p.settle_time => Phase::Push,
            Phase::Push if t >= push_end => {
                self.hold = a;
                Phase::Extended
            }
            Phase::Extended if contact_force == 0.0 => Phase::Airborne,
            Phase::Airborne if contact_force > 0.0 => Phase::Landed,
            phase => phase,
        };
        let pd = |k: usize, target: f64| p.kp * (target - a[k]) - p.kd * da[k];
        let torques = match self.phase {
            Phase::Stance => vec![pd(0, self.hold[0]), pd(1, self.hold[1])],
            // the shoulder follows half the knee angle so the foot stays under it
            Phase::Push => vec![pd(0, -0.5 * a[1]), p.leg_torque],
            Phase::Extended | Phase::Airborne | Phase::Landed => vec![pd(0, self.hold[0]), pd(1, self.hold[1])],
        };
        let fraction = if self.phase == Phase::Landed { p.landing_thrust_fraction } else { p.thrust_fraction };
        let thrusts = allocate(&self.collective(fraction), &self.dynamics.layout, &self.dynamics.limits).thrusts;
        let cmd = ControlCommand::saturate(&self.dynamics, thrusts, DVector::from_vec(torques));
        Ok((cmd, Telemetry::default()))
    }
}
