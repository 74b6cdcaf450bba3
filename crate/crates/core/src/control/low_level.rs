use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::actuation::{allocate, thrusts_to_wrench, N_ROTORS};
use crate::ocp::{Dynamics, MultibodyDynamics, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowLevelGains {
    /// Joint stiffness [N·m/rad].
    pub kp: f64,
    /// Joint damping [N·m·s/rad].
    pub kd: f64,
    /// Correct thrusts with the solver's feedback gains between solves.
    pub state_feedback: bool,
}

impl Default for LowLevelGains {
    fn default() -> Self {
        Self { kp: 2.0, kd: 0.1, state_feedback: false }
    }
}

impl LowLevelGains {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kp >= 0.0 && self.kd >= 0.0 && self.kp.is_finite() && self.kd.is_finite()) {
            return Err("kp and kd must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Rotor thrusts and joint torques sent to the plant for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub thrusts: Vector6<f64>,
    pub torques: DVector<f64>,
    /// The requested thrusts were outside the limits and were re-allocated.
    pub thrust_saturated: bool,
    /// At least one joint torque was clamped.
    pub torque_saturated: bool,
}

impl ControlCommand {
    /// Clamps torques and, if any thrust is out of range, re-allocates the
    /// wrench those thrusts would have produced.
    pub fn saturate(d: &MultibodyDynamics, thrusts: Vector6<f64>, torques: DVector<f64>) -> Self {
        let l = &d.limits;
        let thrust_saturated = thrusts.iter().any(|&t| !(t >= l.thrust_min && t <= l.thrust_max));
        let thrusts = if thrust_saturated {
            let wrench = thrusts_to_wrench(&thrusts.map(|t| if t.is_finite() { t } else { 0.0 }), &d.layout);
            allocate(&wrench, &d.layout, l).thrusts
        } else {
            thrusts
        };
        let clamped = torques.map(|t| if t.is_finite() { l.clamp_torque(t) } else { 0.0 });
        let torque_saturated = clamped != torques;
        Self { thrusts, torques: clamped, thrust_saturated, torque_saturated }
    }
}

/// Low-level loop between solver updates.
///
/// The set-point is the solution's first interval interpolated at
/// `dt_since_solve`. Joint torques are the feedforward plus joint PD; thrusts
/// are the feedforward, optionally corrected by the solver gains.
pub fn low_level(
    d: &MultibodyDynamics,
    solution: &Solution,
    node_dt: f64,
    measured: &DVector<f64>,
    gains: &LowLevelGains,
    dt_since_solve: f64,
) -> ControlCommand {
    let u = &solution.us[0];
    let target = if solution.xs.len() > 1 && dt_since_solve > 0.0 {
        let s = (dt_since_solve / node_dt).min(1.0);
        let dx = d.difference(&solution.xs[0], &solution.xs[1]);
        d.integrate(&solution.xs[0], &(dx * s))
    } else {
        solution.xs[0].clone()
    };
    let mut thrusts = MultibodyDynamics::thrusts(u);
    if gains.state_feedback {
        let err = d.difference(&target, measured);
        let du = &solution.gains[0] * err;
        thrusts += Vector6::from_iterator(du.rows(0, N_ROTORS).iter().copied());
    }
    let (nq, nv) = (d.nq(), d.nv());
    let q_idx = d.robot.arm_q_indices();
    let v_idx = d.robot.arm_indices();
    let torques = DVector::from_fn(q_idx.len(), |k, _| {
        let (iq, iv) = (q_idx[k], v_idx[k]);
        u[N_ROTORS + k] + gains.kp * (target[iq] - measured[iq]) + gains.kd * (target[nq + iv] - measured[nq + iv])
    });
    debug_assert_eq!(measured.len(), nq + nv);
    ControlCommand::saturate(d, thrusts, torques)
}
