use nalgebra::{DVector, Vector3};

use super::model::Model;
use crate::spatial::{angular, linear, Motion, Se3};

/// World poses of all bodies and named frames.
#[derive(Debug, Clone)]
pub struct Placements {
    pub bodies: Vec<Se3>,
    pub frames: Vec<Se3>,
}

/// Pose of every body relative to its parent (world for the root).
pub(crate) fn relative_placements(model: &Model, q: &DVector<f64>) -> Vec<Se3> {
    model.bodies.iter().map(|b| b.joint.placement.compose(&b.joint.transform(q))).collect()
}

pub fn forward_kinematics(model: &Model, q: &DVector<f64>) -> Placements {
    model.check_q(q);
    let rel = relative_placements(model, q);
    let mut bodies: Vec<Se3> = Vec::with_capacity(rel.len());
    for (b, x) in model.bodies.iter().zip(&rel) {
        let pose = match b.parent {
            Some(p) => bodies[p].compose(x),
            None => *x,
        };
        bodies.push(pose);
    }
    let frames = model.frames.iter().map(|f| bodies[f.body].compose(&f.placement)).collect();
    Placements { bodies, frames }
}

pub fn frame_pose(model: &Model, q: &DVector<f64>, frame: usize) -> Se3 {
    forward_kinematics(model, q).frames[frame]
}

/// Spatial velocity of every body, each in its own frame.
pub fn body_velocities(model: &Model, q: &DVector<f64>, v: &DVector<f64>) -> Vec<Motion> {
    model.check_v(v);
    let rel = relative_placements(model, q);
    let mut out: Vec<Motion> = Vec::with_capacity(rel.len());
    for (i, b) in model.bodies.iter().enumerate() {
        let vj = b.joint.motion(v);
        let vi = match b.parent {
            Some(p) => rel[i].act_inv_motion(&out[p]) + vj,
            None => vj,
        };
        out.push(vi);
    }
    out
}

/// Linear velocity of the frame origin and angular velocity, both in world axes.
pub fn frame_velocity(model: &Model, q: &DVector<f64>, v: &DVector<f64>, frame: usize) -> (Vector3<f64>, Vector3<f64>) {
    let poses = forward_kinematics(model, q);
    let vel = body_velocities(model, q, v);
    let f = &model.frames[frame];
    let body_pose = poses.bodies[f.body];
    let vb = vel[f.body];
    let w = angular(&vb);
    let lin_body = linear(&vb) + w.cross(&f.placement.translation);
    (body_pose.rotation * lin_body, body_pose.rotation * w)
}

/// Centre of mass in the world frame and total mass.
pub fn com(model: &Model, q: &DVector<f64>) -> (Vector3<f64>, f64) {
    let poses = forward_kinematics(model, q);
    let mut weighted = Vector3::zeros();
    let mut mass = 0.0;
    for (b, x) in model.bodies.iter().zip(&poses.bodies) {
        weighted += x.transform_point(&b.inertia.com) * b.inertia.mass;
        mass += b.inertia.mass;
    }
    (weighted / mass, mass)
}

pub fn kinetic_energy(model: &Model, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
    body_velocities(model, q, v).iter().zip(&model.bodies).map(|(vb, b)| b.inertia.kinetic_energy(vb)).sum()
}

/// Gravitational potential energy, zero at the world origin.
pub fn potential_energy(model: &Model, q: &DVector<f64>) -> f64 {
    let (c, m) = com(model, q);
    -m * model.gravity.dot(&c)
}
