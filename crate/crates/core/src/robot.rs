//! The hexarotor-with-arm platform: parameters, kinematic tree and model variants.
//!
//! The platform mass reproduces a 5.2 thrust-to-weight ratio with 120 N of
//! total thrust. Inertias, arm geometry and the CoM height are estimates and
//! all live in [`RobotParams`].

use nalgebra::{DVector, Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::actuation::RotorLayout;
use crate::contact::apply_vertical_guide;
use crate::dynamics::{build_model, BodySpec, FrameSpec, JointSpec, JointType, Model, ModelError, ModelSpec};
use crate::spatial::{exp3, Force, Inertia, Se3};

pub const STANDARD_GRAVITY: f64 = 9.80665;

pub const BASE_BODY: &str = "base";
pub const END_EFFECTOR: &str = "end_effector";
pub const ARM_JOINTS: [&str; 2] = ["shoulder", "elbow"];

/// Size of the canonical configuration: base position, quaternion, two joints.
pub const CANONICAL_NQ: usize = 9;
/// Size of the canonical velocity.
pub const CANONICAL_NV: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    /// Gravity magnitude [m/s²], acting along world −z.
    pub gravity: f64,
    /// Platform mass [kg]. Default: 120 N / (5.2·g) minus both arm links.
    pub base_mass: f64,
    /// Principal moments of the platform about its CoM [kg·m²] (estimate).
    pub base_inertia: [f64; 3],
    /// Height of the platform CoM above the rotor plane [m] (estimate).
    pub base_com_height: f64,
    /// Shoulder joint position in the base frame [m] (estimate).
    pub shoulder_position: [f64; 3],
    /// Arm link lengths [m] (estimate).
    pub link_lengths: [f64; 2],
    /// Arm link masses [kg] (estimate).
    pub link_masses: [f64; 2],
    /// Link radius used for the rod inertia about its own axis [m] (estimate).
    pub link_radius: f64,
    /// Point mass attached at the end effector [kg].
    pub tip_mass: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            gravity: STANDARD_GRAVITY,
            base_mass: 1.953_191_260_718_296,
            base_inertia: [0.015, 0.015, 0.025],
            base_com_height: 0.05,
            shoulder_position: [0.0, 0.0, -0.04],
            link_lengths: [0.16, 0.16],
            link_masses: [0.25, 0.15],
            link_radius: 0.01,
            tip_mass: 0.0,
        }
    }
}

fn rod_inertia(mass: f64, length: f64, radius: f64) -> Matrix3<f64> {
    let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
    let axial = 0.5 * mass * radius * radius;
    Matrix3::from_diagonal(&Vector3::new(transverse, transverse, axial))
}

impl RobotParams {
    pub fn total_mass(&self) -> f64 {
        self.base_mass + self.link_masses.iter().sum::<f64>() + self.tip_mass
    }

    /// Floating base plus the planar two-link arm. Both arm joints rotate about
    /// the body y axis; at zero angles the arm hangs straight down.
    pub fn model_spec(&self) -> ModelSpec {
        let [l1, l2] = self.link_lengths;
        let [m1, m2] = self.link_masses;
        let link1 = BodySpec {
            name: "upper_link".into(),
            mass: m1,
            inertia: rod_inertia(m1, l1, self.link_radius),
            com: Vector3::new(0.0, 0.0, -0.5 * l1),
        };
        let rod2 = Inertia::new(m2, Vector3::new(0.0, 0.0, -0.5 * l2), rod_inertia(m2, l2, self.link_radius));
        let lower = if self.tip_mass > 0.0 {
            rod2.combine(&Inertia::point(self.tip_mass, Vector3::new(0.0, 0.0, -l2)))
        } else {
            rod2
        };
        let link2 = BodySpec { name: "lower_link".into(), mass: lower.mass, inertia: lower.rotational, com: lower.com };
        let [ix, iy, iz] = self.base_inertia;
        let base = BodySpec {
            name: BASE_BODY.into(),
            mass: self.base_mass,
            inertia: Matrix3::from_diagonal(&Vector3::new(ix, iy, iz)),
            com: Vector3::new(0.0, 0.0, self.base_com_height),
        };
        let joints = vec![
            JointSpec {
                name: "root".into(),
                parent: None,
                child: BASE_BODY.into(),
                kind: JointType::FreeFlyer,
                placement: Se3::identity(),
            },
            JointSpec {
                name: ARM_JOINTS[0].into(),
                parent: Some(BASE_BODY.into()),
                child: "upper_link".into(),
                kind: JointType::Revolute { axis: Vector3::y() },
                placement: Se3::from_translation(Vector3::from(self.shoulder_position)),
            },
            JointSpec {
                name: ARM_JOINTS[1].into(),
                parent: Some("upper_link".into()),
                child: "lower_link".into(),
                kind: JointType::Revolute { axis: Vector3::y() },
                placement: Se3::from_translation(Vector3::new(0.0, 0.0, -l1)),
            },
        ];
        let frames = vec![
            FrameSpec { name: "base".into(), body: BASE_BODY.into(), placement: Se3::identity() },
            FrameSpec {
                name: END_EFFECTOR.into(),
                body: "lower_link".into(),
                placement: Se3::from_translation(Vector3::new(0.0, 0.0, -l2)),
            },
        ];
        ModelSpec { bodies: vec![base, link1, link2], joints, gravity: Vector3::new(0.0, 0.0, -self.gravity), frames }
    }
}

/// Rigidly welds the named revolute/prismatic joints at the given positions,
/// merging each child body into its parent.
pub fn lock_joints(spec: &ModelSpec, locks: &[(&str, f64)]) -> Result<ModelSpec, ModelError> {
    let mut out = spec.clone();
    for &(name, value) in locks {
        let ji = out.joints.iter().position(|j| j.name == name).ok_or_else(|| ModelError::UnknownJoint(name.into()))?;
        let joint = out.joints.remove(ji);
        let parent =
            joint.parent.clone().ok_or_else(|| ModelError::NotATree(format!("cannot lock root joint `{name}`")))?;
        let motion = match joint.kind {
            JointType::Revolute { axis } => Se3::from_rotation(exp3(&(axis * value))),
            JointType::Prismatic { axis } => Se3::from_translation(axis * value),
            JointType::FreeFlyer => return Err(ModelError::NotATree(format!("cannot lock free-flyer `{name}`"))),
        };
        let x = joint.placement.compose(&motion);
        let ci = out
            .bodies
            .iter()
            .position(|b| b.name == joint.child)
            .ok_or_else(|| ModelError::UnknownBody { owner: name.into(), body: joint.child.clone() })?;
        let child = out.bodies.remove(ci);
        let pi = out
            .bodies
            .iter()
            .position(|b| b.name == parent)
            .ok_or_else(|| ModelError::UnknownBody { owner: name.into(), body: parent.clone() })?;
        let p = &mut out.bodies[pi];
        let merged = Inertia::new(p.mass, p.com, p.inertia)
            .combine(&Inertia::new(child.mass, child.com, child.inertia).transformed(&x));
        p.mass = merged.mass;
        p.com = merged.com;
        p.inertia = 0.5 * (merged.rotational + merged.rotational.transpose());
        for j in out.joints.iter_mut().filter(|j| j.parent.as_deref() == Some(child.name.as_str())) {
            j.parent = Some(parent.clone());
            j.placement = x.compose(&j.placement);
        }
        for f in out.frames.iter_mut().filter(|f| f.body == child.name) {
            f.body = parent.clone();
            f.placement = x.compose(&f.placement);
        }
    }
    Ok(out)
}

/// Which mechanical configuration of the platform a [`Robot`] models.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// Free-flying base with an actuated two-joint arm.
    Full,
    /// Base on a vertical prismatic guide, arm actuated.
    Guided,
    /// Free-flying base with the arm welded at the given angles.
    Locked([f64; 2]),
}

/// A built platform model together with its variant-specific bookkeeping.
#[derive(Debug, Clone)]
pub struct Robot {
    pub params: RobotParams,
    pub variant: Variant,
    pub model: Model,
    pub end_effector: usize,
}

impl Robot {
    pub fn new(params: RobotParams, variant: Variant) -> Result<Self, ModelError> {
        let spec = params.model_spec();
        let spec = match &variant {
            Variant::Full => spec,
            Variant::Guided => apply_vertical_guide(&spec),
            Variant::Locked(angles) => lock_joints(&spec, &[(ARM_JOINTS[1], angles[1]), (ARM_JOINTS[0], angles[0])])?,
        };
        let model = build_model(&spec)?;
        let end_effector = model.frame_id(END_EFFECTOR).expect("end effector frame");
        Ok(Self { params, variant, model, end_effector })
    }

    pub fn base_frame(&self) -> usize {
        self.model.frame_id("base").expect("base frame")
    }

    /// Number of actuated arm joints in this variant.
    pub fn n_arm(&self) -> usize {
        self.model.n_joints()
    }

    /// Configuration with the base at `position`, level, and the arm at `arm`.
    pub fn configuration(&self, position: Vector3<f64>, arm: [f64; 2]) -> DVector<f64> {
        let mut q = self.model.neutral();
        match self.variant {
            Variant::Full => {
                q.rows_mut(0, 3).copy_from(&position);
                q[7] = arm[0];
                q[8] = arm[1];
            }
            Variant::Guided => {
                q[0] = position.z;
                q[1] = arm[0];
                q[2] = arm[1];
            }
            Variant::Locked(_) => q.rows_mut(0, 3).copy_from(&position),
        }
        q
    }

    /// Velocity indices of the actuated arm joints, in [`ARM_JOINTS`] order.
    pub fn arm_indices(&self) -> Vec<usize> {
        ARM_JOINTS.iter().filter_map(|j| self.model.joint_v_index(j)).collect()
    }

    /// Configuration indices of the actuated arm joints, in [`ARM_JOINTS`] order.
    pub fn arm_q_indices(&self) -> Vec<usize> {
        ARM_JOINTS
            .iter()
            .filter_map(|j| self.model.bodies.iter().find(|b| b.joint_name == *j).map(|b| b.joint.idx_q))
            .collect()
    }

    /// Joint-space forces and per-body external wrenches produced by rotor
    /// thrusts (acting on the base) and arm joint torques.
    pub fn actuation_forces(
        &self,
        layout: &RotorLayout,
        thrusts: &Vector6<f64>,
        torques: &[f64],
    ) -> (DVector<f64>, Vec<Force>) {
        let mut tau = DVector::zeros(self.model.nv);
        for (&i, &t) in self.arm_indices().iter().zip(torques) {
            tau[i] = t;
        }
        let mut fext = vec![Force::zeros(); self.model.bodies.len()];
        let base = self.model.body_id(BASE_BODY).expect("base body");
        fext[base] = layout.wrench_matrix() * thrusts;
        (tau, fext)
    }

    /// Expresses a state of this variant in the canonical 9/8-dimensional layout
    /// of the full platform.
    pub fn canonical(&self, q: &DVector<f64>, v: &DVector<f64>) -> ([f64; CANONICAL_NQ], [f64; CANONICAL_NV]) {
        let mut cq = [0.0; CANONICAL_NQ];
        let mut cv = [0.0; CANONICAL_NV];
        match &self.variant {
            Variant::Full => {
                cq.copy_from_slice(q.as_slice());
                cv.copy_from_slice(v.as_slice());
            }
            Variant::Guided => {
                cq[2] = q[0];
                cq[6] = 1.0;
                cq[7] = q[1];
                cq[8] = q[2];
                cv[2] = v[0];
                cv[6] = v[1];
                cv[7] = v[2];
            }
            Variant::Locked(angles) => {
                cq[..7].copy_from_slice(&q.as_slice()[..7]);
                cq[7] = angles[0];
                cq[8] = angles[1];
                cv[..6].copy_from_slice(&v.as_slice()[..6]);
            }
        }
        (cq, cv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{com, forward_kinematics};

    #[test]
    fn default_platform_has_eight_velocity_dofs() {
        let r = Robot::new(RobotParams::default(), Variant::Full).unwrap();
        assert_eq!(r.model.nv, 8);
        assert_eq!(r.model.nq, 9);
    }

    #[test]
    fn locked_model_preserves_mass_com_and_frames() {
        let params = RobotParams { tip_mass: 0.1, ..Default::default() };
        let full = Robot::new(params.clone(), Variant::Full).unwrap();
        let angles = [0.4, -0.9];
        let locked = Robot::new(params, Variant::Locked(angles)).unwrap();
        assert_eq!(locked.model.nv, 6);
        let p = Vector3::new(0.3, -0.2, 1.0);
        let qf = full.configuration(p, angles);
        let ql = locked.configuration(p, angles);
        let (cf, mf) = com(&full.model, &qf);
        let (cl, ml) = com(&locked.model, &ql);
        assert!((mf - ml).abs() < 1e-12);
        assert!((cf - cl).norm() < 1e-12);
        let ef = forward_kinematics(&full.model, &qf).frames[full.end_effector];
        let el = forward_kinematics(&locked.model, &ql).frames[locked.end_effector];
        assert!((ef.translation - el.translation).norm() < 1e-12);
    }

    #[test]
    fn canonical_layouts() {
        let guided = Robot::new(RobotParams::default(), Variant::Guided).unwrap();
        let q = DVector::from_vec(vec![0.7, 0.1, -0.2]);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (cq, cv) = guided.canonical(&q, &v);
        assert_eq!(cq, [0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 1.0, 0.1, -0.2]);
        assert_eq!(cv, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 3.0]);
    }
}
