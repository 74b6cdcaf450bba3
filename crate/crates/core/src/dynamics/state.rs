use nalgebra::{DVector, Quaternion, UnitQuaternion, Vector3};

use super::model::{quaternion_at, JointType, Model};
use crate::spatial::log_quaternion;

/// Generalized position and velocity.
///
/// For a free-flyer root `q` starts with the base position (world) and the
/// orientation quaternion stored as `[qx qy qz qw]`; `v` starts with the base
/// linear and angular velocity, both expressed in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

impl State {
    pub fn new(q: DVector<f64>, v: DVector<f64>) -> Self {
        Self { q, v }
    }

    pub fn at_rest(model: &Model, q: DVector<f64>) -> Self {
        Self { q, v: DVector::zeros(model.nv) }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

fn write_quaternion(q: &mut DVector<f64>, i: usize, quat: &UnitQuaternion<f64>) {
    let c = quat.as_ref().coords;
    q.rows_mut(i + 3, 4).copy_from(&c);
}

/// `q ⊕ dv`: moves the configuration along the tangent vector `dv`.
///
/// Positions and joints are updated additively (the base translation uses the
/// starting orientation to rotate the body-frame displacement into the world),
/// the orientation by the SO(3) exponential, and the quaternion is renormalized.
pub fn integrate_configuration(model: &Model, q: &DVector<f64>, dv: &DVector<f64>) -> DVector<f64> {
    model.check_q(q);
    model.check_v(dv);
    let mut out = q.clone();
    for b in &model.bodies {
        let (iq, iv) = (b.joint.idx_q, b.joint.idx_v);
        match b.joint.kind {
            JointType::FreeFlyer => {
                let rot = quaternion_at(q, iq + 3);
                let dp = rot * Vector3::new(dv[iv], dv[iv + 1], dv[iv + 2]);
                for k in 0..3 {
                    out[iq + k] += dp[k];
                }
                let dw = Vector3::new(dv[iv + 3], dv[iv + 4], dv[iv + 5]);
                let next = rot * UnitQuaternion::from_scaled_axis(dw);
                write_quaternion(&mut out, iq, &UnitQuaternion::new_normalize(next.into_inner()));
            }
            _ => out[iq] += dv[iv],
        }
    }
    out
}

/// `q1 ⊖ q0`: the tangent vector with `q0 ⊕ (q1 ⊖ q0) = q1`.
pub fn difference_configuration(model: &Model, q0: &DVector<f64>, q1: &DVector<f64>) -> DVector<f64> {
    model.check_q(q0);
    model.check_q(q1);
    let mut out = DVector::zeros(model.nv);
    for b in &model.bodies {
        let (iq, iv) = (b.joint.idx_q, b.joint.idx_v);
        match b.joint.kind {
            JointType::FreeFlyer => {
                let r0 = quaternion_at(q0, iq + 3);
                let r1 = quaternion_at(q1, iq + 3);
                let dp = Vector3::new(q1[iq] - q0[iq], q1[iq + 1] - q0[iq + 1], q1[iq + 2] - q0[iq + 2]);
                out.rows_mut(iv, 3).copy_from(&(r0.inverse() * dp));
                out.rows_mut(iv + 3, 3).copy_from(&log_quaternion(&(r0.inverse() * r1)));
            }
            _ => out[iv] = q1[iq] - q0[iq],
        }
    }
    out
}

/// Semi-implicit Euler: `v ← v + a·dt`, then `q ← q ⊕ v·dt`.
pub fn integrate(model: &Model, state: &State, a: &DVector<f64>, dt: f64) -> State {
    assert!(dt > 0.0, "dt must be positive");
    model.check_v(a);
    let v = &state.v + a * dt;
    let q = integrate_configuration(model, &state.q, &(&v * dt));
    State { q, v }
}

/// Sets the base orientation of a free-flyer configuration.
pub fn set_base_orientation(model: &Model, q: &mut DVector<f64>, rot: &UnitQuaternion<f64>) {
    let b = &model.bodies[0];
    assert!(matches!(b.joint.kind, JointType::FreeFlyer), "model has no free-flyer root");
    write_quaternion(q, b.joint.idx_q, rot);
}

/// Base orientation of a free-flyer configuration.
pub fn base_orientation(model: &Model, q: &DVector<f64>) -> UnitQuaternion<f64> {
    let b = &model.bodies[0];
    match b.joint.kind {
        JointType::FreeFlyer => quaternion_at(q, b.joint.idx_q + 3),
        _ => UnitQuaternion::identity(),
    }
}

pub fn quaternion_norm(model: &Model, q: &DVector<f64>) -> Option<f64> {
    let b = &model.bodies[0];
    match b.joint.kind {
        JointType::FreeFlyer => {
            let i = b.joint.idx_q;
            Some(Quaternion::new(q[i + 6], q[i + 3], q[i + 4], q[i + 5]).norm())
        }
        _ => None,
    }
}
