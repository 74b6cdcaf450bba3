//! Recursive Newton-Euler, composite-rigid-body and articulated-body algorithms.
//!
//! External forces are given per body, in the body frame.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use super::kinematics::relative_placements;
use super::model::{JointType, Model};
use crate::spatial::{angular, cross_force, cross_motion, linear, stack, Force, Motion};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("articulated inertia of body `{0}` could not be factorized")]
    Factorization(String),
    #[error("non-finite value in dynamics input")]
    NonFinite,
}

fn world_acceleration(model: &Model) -> Motion {
    stack(&(-model.gravity), &nalgebra::Vector3::zeros())
}

/// `Sᵀ f` written into `out` at the joint's velocity indices.
fn project_force(kind: &JointType, f: &Force, out: &mut DVector<f64>, idx: usize) {
    match kind {
        JointType::FreeFlyer => out.rows_mut(idx, 6).copy_from(f),
        JointType::Revolute { axis } => out[idx] = axis.dot(&angular(f)),
        JointType::Prismatic { axis } => out[idx] = axis.dot(&linear(f)),
    }
}

fn check_fext(model: &Model, fext: Option<&[Force]>) {
    if let Some(f) = fext {
        assert_eq!(f.len(), model.bodies.len(), "one external force per body");
    }
}

/// Generalized force `τ = M(q)·a + b(q, v) − Jᵀ f_ext`.
pub fn inverse_dynamics(
    model: &Model,
    q: &DVector<f64>,
    v: &DVector<f64>,
    a: &DVector<f64>,
    fext: Option<&[Force]>,
) -> DVector<f64> {
    model.check_q(q);
    model.check_v(v);
    model.check_v(a);
    check_fext(model, fext);
    let n = model.bodies.len();
    let rel = relative_placements(model, q);
    let a_world = world_acceleration(model);
    let mut vel: Vec<Motion> = Vec::with_capacity(n);
    let mut acc: Vec<Motion> = Vec::with_capacity(n);
    let mut force: Vec<Force> = Vec::with_capacity(n);
    for (i, b) in model.bodies.iter().enumerate() {
        let vj = b.joint.motion(v);
        let aj = b.joint.motion(a);
        let (vp, ap) = match b.parent {
            Some(p) => (rel[i].act_inv_motion(&vel[p]), rel[i].act_inv_motion(&acc[p])),
            None => (Motion::zeros(), rel[i].act_inv_motion(&a_world)),
        };
        let vi = vp + vj;
        let ai = ap + aj + cross_motion(&vi, &vj);
        let inertia = b.inertia.matrix();
        let mut fi = inertia * ai + cross_force(&vi, &(inertia * vi));
        if let Some(fe) = fext {
            fi -= fe[i];
        }
        vel.push(vi);
        acc.push(ai);
        force.push(fi);
    }
    let mut tau = DVector::zeros(model.nv);
    for i in (0..n).rev() {
        let b = &model.bodies[i];
        project_force(&b.joint.kind, &force[i], &mut tau, b.joint.idx_v);
        if let Some(p) = b.parent {
            let fp = rel[i].act_force(&force[i]);
            force[p] += fp;
        }
    }
    tau
}

fn joint_columns(kind: &JointType) -> Vec<Motion> {
    match kind {
        JointType::FreeFlyer => (0..6).map(|k| Motion::ith(k, 1.0)).collect(),
        JointType::Revolute { axis } => vec![stack(&nalgebra::Vector3::zeros(), axis)],
        JointType::Prismatic { axis } => vec![stack(axis, &nalgebra::Vector3::zeros())],
    }
}

/// Joint-space inertia matrix by the composite-rigid-body algorithm.
pub fn mass_matrix(model: &Model, q: &DVector<f64>) -> DMatrix<f64> {
    model.check_q(q);
    let n = model.bodies.len();
    let rel = relative_placements(model, q);
    let xmat: Vec<Matrix6<f64>> = rel.iter().map(|x| x.inv_motion_matrix()).collect();
    let mut composite: Vec<Matrix6<f64>> = model.bodies.iter().map(|b| b.inertia.matrix()).collect();
    for i in (1..n).rev() {
        if let Some(p) = model.bodies[i].parent {
            let c = xmat[i].transpose() * composite[i] * xmat[i];
            composite[p] += c;
        }
    }
    let mut m = DMatrix::zeros(model.nv, model.nv);
    for i in 0..n {
        let bi = &model.bodies[i];
        let si = joint_columns(&bi.joint.kind);
        let mut forces: Vec<Force> = si.iter().map(|s| composite[i] * s).collect();
        for (c, f) in forces.iter().enumerate() {
            for (r, s) in si.iter().enumerate() {
                m[(bi.joint.idx_v + r, bi.joint.idx_v + c)] = s.dot(f);
            }
        }
        let mut j = i;
        while let Some(p) = model.bodies[j].parent {
            for f in forces.iter_mut() {
                *f = rel[j].act_force(f);
            }
            let bp = &model.bodies[p];
            for (c, f) in forces.iter().enumerate() {
                for (r, s) in joint_columns(&bp.joint.kind).iter().enumerate() {
                    let val = s.dot(f);
                    m[(bp.joint.idx_v + r, bi.joint.idx_v + c)] = val;
                    m[(bi.joint.idx_v + c, bp.joint.idx_v + r)] = val;
                }
            }
            j = p;
        }
    }
    m
}

/// Generalized acceleration by the articulated-body algorithm.
pub fn forward_dynamics(
    model: &Model,
    q: &DVector<f64>,
    v: &DVector<f64>,
    tau: &DVector<f64>,
    fext: Option<&[Force]>,
) -> Result<DVector<f64>, DynamicsError> {
    model.check_q(q);
    model.check_v(v);
    model.check_v(tau);
    check_fext(model, fext);
    let n = model.bodies.len();
    let rel = relative_placements(model, q);

    let mut vel: Vec<Motion> = Vec::with_capacity(n);
    let mut bias_acc: Vec<Motion> = Vec::with_capacity(n);
    let mut ia: Vec<Matrix6<f64>> = Vec::with_capacity(n);
    let mut pa: Vec<Force> = Vec::with_capacity(n);
    for (i, b) in model.bodies.iter().enumerate() {
        let vj = b.joint.motion(v);
        let vi = match b.parent {
            Some(p) => rel[i].act_inv_motion(&vel[p]) + vj,
            None => vj,
        };
        let inertia = b.inertia.matrix();
        let mut p = cross_force(&vi, &(inertia * vi));
        if let Some(fe) = fext {
            p -= fe[i];
        }
        bias_acc.push(cross_motion(&vi, &vj));
        vel.push(vi);
        ia.push(inertia);
        pa.push(p);
    }

    // (U, D, u) for 1-DoF joints
    let mut u_vec = vec![Vector6::zeros(); n];
    let mut d_val = vec![0.0; n];
    let mut u_val = vec![0.0; n];
    for i in (0..n).rev() {
        let b = &model.bodies[i];
        let Some(s) = b.joint.axis_motion() else {
            continue;
        };
        let u = ia[i] * s;
        let d = s.dot(&u);
        if !(d > 0.0) {
            return Err(DynamicsError::Factorization(b.name.clone()));
        }
        let uu = tau[b.joint.idx_v] - s.dot(&pa[i]);
        u_vec[i] = u;
        d_val[i] = d;
        u_val[i] = uu;
        if let Some(p) = b.parent {
            let i_a = ia[i] - u * u.transpose() / d;
            let p_a = pa[i] + i_a * bias_acc[i] + u * (uu / d);
            let x = rel[i].inv_motion_matrix();
            let add = x.transpose() * i_a * x;
            ia[p] += add;
            let fp = rel[i].act_force(&p_a);
            pa[p] += fp;
        }
    }

    let a_world = world_acceleration(model);
    let mut acc: Vec<Motion> = Vec::with_capacity(n);
    let mut out = DVector::zeros(model.nv);
    for (i, b) in model.bodies.iter().enumerate() {
        let ap = match b.parent {
            Some(p) => rel[i].act_inv_motion(&acc[p]),
            None => rel[i].act_inv_motion(&a_world),
        } + bias_acc[i];
        let ai = match b.joint.axis_motion() {
            Some(s) => {
                let qdd = (u_val[i] - u_vec[i].dot(&ap)) / d_val[i];
                out[b.joint.idx_v] = qdd;
                ap + s * qdd
            }
            None => {
                // free-flyer root: IA·a = τ − pA
                let t = Vector6::from_iterator(tau.rows(b.joint.idx_v, 6).iter().copied());
                let chol = ia[i].cholesky().ok_or_else(|| DynamicsError::Factorization(b.name.clone()))?;
                let ai = chol.solve(&(t - pa[i]));
                out.rows_mut(b.joint.idx_v, 6).copy_from(&(ai - ap));
                ai
            }
        };
        acc.push(ai);
    }
    Ok(out)
}

/// `b(q, v)`: gravity, Coriolis and centrifugal terms.
pub fn bias_forces(model: &Model, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    inverse_dynamics(model, q, v, &DVector::zeros(model.nv), None)
}
