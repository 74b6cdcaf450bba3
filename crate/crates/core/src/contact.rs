//! Compliant point contact against a flat ground plane, and the vertical-guide
//! model transform used for the jump experiment.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{JointType, ModelSpec};
use crate::spatial::{stack, Force, Se3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    /// Normal stiffness [N/m].
    pub stiffness: f64,
    /// Normal damping [N·s/m].
    pub damping: f64,
    pub friction: f64,
    /// Tangential speed at which friction saturates [m/s].
    pub friction_velocity: f64,
    pub ground_height: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { stiffness: 5000.0, damping: 100.0, friction: 0.8, friction_velocity: 0.01, ground_height: 0.0 }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.stiffness > 0.0) {
            return Err("stiffness must be > 0".into());
        }
        if !(self.damping >= 0.0) {
            return Err("damping must be >= 0".into());
        }
        if !(self.friction >= 0.0) {
            return Err("friction must be >= 0".into());
        }
        if !(self.friction_velocity > 0.0) {
            return Err("friction_velocity must be > 0".into());
        }
        Ok(())
    }
}

/// World-frame force on a point at `position` moving with `velocity`.
///
/// Spring-damper normal force, clamped at zero so the ground never pulls, and
/// Coulomb friction regularized linearly below `friction_velocity`.
pub fn contact_force(position: &Vector3<f64>, velocity: &Vector3<f64>, params: &ContactParams) -> Vector3<f64> {
    let depth = params.ground_height - position.z;
    if depth <= 0.0 {
        return Vector3::zeros();
    }
    let normal = (params.stiffness * depth - params.damping * velocity.z).max(0.0);
    if normal == 0.0 {
        return Vector3::zeros();
    }
    let tangential = Vector3::new(velocity.x, velocity.y, 0.0);
    let ratio = tangential / params.friction_velocity;
    let sat = if ratio.norm() > 1.0 { ratio.normalize() } else { ratio };
    let friction = -params.friction * normal * sat;
    Vector3::new(friction.x, friction.y, normal)
}

/// Body-frame wrench of a world force applied at a world point on a body
/// with pose `body`.
pub fn point_force_wrench(body: &Se3, point: &Vector3<f64>, force: &Vector3<f64>) -> Force {
    let rt = body.rotation.transpose();
    let f = rt * force;
    let r = rt * (point - body.translation);
    stack(&f, &r.cross(&f))
}

/// Replaces the free-flyer root with a prismatic joint along world z.
pub fn apply_vertical_guide(spec: &ModelSpec) -> ModelSpec {
    let mut out = spec.clone();
    for j in out.joints.iter_mut().filter(|j| j.parent.is_none()) {
        if matches!(j.kind, JointType::FreeFlyer) {
            j.kind = JointType::Prismatic { axis: Vector3::z() };
            j.placement = Se3::identity();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn above_ground_is_free() {
        let f = contact_force(&Vector3::new(0.0, 0.0, 0.1), &Vector3::new(0.0, 0.0, -3.0), &ContactParams::default());
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn static_penetration() {
        let f = contact_force(&Vector3::new(0.0, 0.0, -0.01), &Vector3::zeros(), &ContactParams::default());
        assert!((f.z - 50.0).abs() < 1e-12);
        assert_eq!(f.x, 0.0);
    }

    #[test]
    fn fast_withdrawal_never_pulls() {
        // k·δ − c·ż = 50 − 100·1 < 0
        let f = contact_force(&Vector3::new(0.0, 0.0, -0.01), &Vector3::new(0.3, 0.0, 1.0), &ContactParams::default());
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn sliding_friction_opposes_motion() {
        let p = ContactParams::default();
        let f = contact_force(&Vector3::new(0.0, 0.0, -0.01), &Vector3::new(1.0, 0.0, 0.0), &p);
        assert!((f.x + p.friction * 50.0).abs() < 1e-12);
    }

    #[test]
    fn wrench_of_force_at_origin_has_no_moment() {
        let body = Se3::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let w = point_force_wrench(&body, &Vector3::new(1.0, 2.0, 3.0), &Vector3::new(0.0, 0.0, 5.0));
        assert_eq!(w, Force::new(0.0, 0.0, 5.0, 0.0, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn normal_nonnegative_and_friction_bounded(
            z in -0.05f64..0.05, vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
            mu in 0.0f64..1.5,
        ) {
            let p = ContactParams { friction: mu, ..Default::default() };
            let f = contact_force(&Vector3::new(0.0, 0.0, z), &Vector3::new(vx, vy, vz), &p);
            prop_assert!(f.z >= 0.0);
            if z > p.ground_height {
                prop_assert_eq!(f, Vector3::zeros());
            }
            prop_assert!(f.xy().norm() <= mu * f.z + 1e-12);
        }
    }
}
