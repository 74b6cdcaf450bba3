use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::algorithms::{inverse_dynamics, mass_matrix, DynamicsError};
use super::model::{JointType, Model};
use super::state::{integrate_configuration, State};
use crate::spatial::{exp3, right_jacobian3, Force};

const FD_STEP: f64 = 1e-6;
const MAX_ITER: usize = 100;

/// Maps chart rates `δ̇` at `q ⊕ δ` to the model's velocity coordinates.
///
/// Only the free-flyer block differs from identity: the chart moves the base
/// by `R·δ_lin` and `R·exp(δ_ω)`, so body linear velocity is `exp(δ_ω)ᵀ·δ̇_lin`
/// and body angular velocity `Jr(δ_ω)·δ̇_ω`.
fn chart_jacobian(model: &Model, delta: &DVector<f64>) -> Option<(usize, Matrix3<f64>, Matrix3<f64>)> {
    let b = &model.bodies[0];
    if !matches!(b.joint.kind, JointType::FreeFlyer) {
        return None;
    }
    let i = b.joint.idx_v;
    let w = Vector3::new(delta[i + 3], delta[i + 4], delta[i + 5]);
    Some((i, exp3(&w).transpose(), right_jacobian3(&w)))
}

/// Mass matrix in chart coordinates, `Jᵀ·M(q ⊕ δ)·J`.
fn chart_mass(model: &Model, q: &DVector<f64>, delta: &DVector<f64>) -> DMatrix<f64> {
    let m = mass_matrix(model, &integrate_configuration(model, q, delta));
    let Some((i, jl, ja)) = chart_jacobian(model, delta) else {
        return m;
    };
    let mut j = DMatrix::identity(model.nv, model.nv);
    j.view_mut((i, i), (3, 3)).copy_from(&jl);
    j.view_mut((i + 3, i + 3), (3, 3)).copy_from(&ja);
    j.transpose() * m * j
}

/// Central-difference derivatives `∂M_c/∂δ_k` of the chart mass matrix at the origin.
/// The kinetic-energy gradient at chart rate `r` is then `½·rᵀ·D_k·r`.
fn chart_mass_derivatives(model: &Model, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let mut delta = DVector::zeros(model.nv);
    (0..model.nv)
        .map(|k| {
            delta[k] = FD_STEP;
            let plus = chart_mass(model, q, &delta);
            delta[k] = -FD_STEP;
            let minus = chart_mass(model, q, &delta);
            delta[k] = 0.0;
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

fn kinetic_gradient(derivatives: &[DMatrix<f64>], rate: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(derivatives.len(), derivatives.iter().map(|d| 0.5 * rate.dot(&(d * rate))))
}

/// One step of symplectic Euler on the canonical momentum.
///
/// With `p = M(q)·v`, it solves `p⁺ = p + dt·(∂T/∂q(q, v⁺) + τ + Jᵀf − g(q))` for
/// the intermediate velocity `v⁺ = M(q)⁻¹p⁺`, moves `q ← q ⊕ v⁺·dt`, and
/// recovers the new velocity from `p⁺` at the new configuration. External and
/// joint forces are held over the step. For a constant mass matrix this is
/// exactly `v ← v + a·dt; q ← q ⊕ v·dt`; unlike that scheme it does not pump
/// energy into passive articulated systems.
pub fn symplectic_step(
    model: &Model,
    state: &State,
    tau: &DVector<f64>,
    fext: Option<&[Force]>,
    dt: f64,
) -> Result<State, DynamicsError> {
    assert!(dt > 0.0, "dt must be positive");
    let q = &state.q;
    let zero = DVector::zeros(model.nv);
    let m0 = mass_matrix(model, q);
    let chol = m0.clone().cholesky().ok_or_else(|| DynamicsError::Factorization("mass matrix".into()))?;
    let forcing = tau - inverse_dynamics(model, q, &zero, &zero, fext);

    let derivatives = chart_mass_derivatives(model, q);
    let mut rate = state.v.clone();
    for _ in 0..MAX_ITER {
        let next = &state.v + chol.solve(&(kinetic_gradient(&derivatives, &rate) + &forcing)) * dt;
        let change = (&next - &rate).amax();
        rate = next;
        if !change.is_finite() {
            return Err(DynamicsError::NonFinite);
        }
        if change <= 1e-14 * (1.0 + rate.amax()) {
            break;
        }
    }

    let step = &rate * dt;
    let q_next = integrate_configuration(model, q, &step);
    let mut p = &m0 * &rate;
    if let Some((i, jl, ja)) = chart_jacobian(model, &step) {
        // chart momentum to model momentum: J⁻ᵀ, with J_lin orthogonal
        let pl = jl * p.fixed_rows::<3>(i);
        let pa = ja.transpose().lu().solve(&p.fixed_rows::<3>(i + 3).into_owned()).ok_or(DynamicsError::NonFinite)?;
        p.rows_mut(i, 3).copy_from(&pl);
        p.rows_mut(i + 3, 3).copy_from(&pa);
    }
    let m1: DMatrix<f64> = mass_matrix(model, &q_next);
    let v_next = m1.cholesky().ok_or_else(|| DynamicsError::Factorization("mass matrix".into()))?.solve(&p);
    let out = State::new(q_next, v_next);
    if !out.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::forward_dynamics;
    use crate::robot::{Robot, RobotParams, Variant};

    #[test]
    fn chart_mass_is_model_mass_at_origin() {
        let r = Robot::new(RobotParams::default(), Variant::Full).unwrap();
        let q = r.configuration(Vector3::new(0.1, 0.0, 1.0), [0.4, -0.3]);
        let m = mass_matrix(&r.model, &q);
        assert_eq!(chart_mass(&r.model, &q, &DVector::zeros(8)), m);
    }

    #[test]
    fn kinetic_gradient_matches_energy_differences() {
        let r = Robot::new(RobotParams::default(), Variant::Full).unwrap();
        let q = r.configuration(Vector3::new(0.0, 0.0, 1.0), [0.4, -0.3]);
        let rate = DVector::from_vec(vec![0.2, -0.1, 0.3, 0.5, -0.4, 0.2, 1.0, -2.0]);
        let grad = kinetic_gradient(&chart_mass_derivatives(&r.model, &q), &rate);
        let h = 1e-4;
        for k in 0..8 {
            let energy = |s: f64| {
                let mut d = DVector::zeros(8);
                d[k] = s;
                let m = chart_mass(&r.model, &q, &d);
                0.5 * rate.dot(&(m * &rate))
            };
            let fd = (energy(h) - energy(-h)) / (2.0 * h);
            assert!((grad[k] - fd).abs() < 1e-9, "{k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn matches_velocity_form_to_first_order() {
        let r = Robot::new(RobotParams::default(), Variant::Full).unwrap();
        let q = r.configuration(Vector3::new(0.0, 0.0, 1.0), [0.4, -0.3]);
        let v = DVector::from_vec(vec![0.2, -0.1, 0.3, 0.5, -0.4, 0.2, 1.0, -2.0]);
        let tau = DVector::from_vec(vec![0.0, 0.0, 23.0, 0.01, 0.0, 0.0, 0.1, -0.05]);
        let s = State::new(q, v);
        let a = forward_dynamics(&r.model, &s.q, &s.v, &tau, None).unwrap();
        let diff = |dt: f64| {
            let euler = super::super::state::integrate(&r.model, &s, &a, dt);
            let step = symplectic_step(&r.model, &s, &tau, None, dt).unwrap();
            (&step.v - &euler.v).amax()
        };
        // the two schemes differ at O(dt²) per step
        let ratio = diff(1e-3) / diff(1e-4);
        assert!(ratio > 80.0 && ratio < 120.0, "ratio {ratio}");
    }

    #[test]
    fn free_body_momentum_is_exact() {
        // constant mass matrix: identical to the velocity form
        let r = Robot::new(RobotParams::default(), Variant::Locked([0.0, 0.0])).unwrap();
        let s = State::new(r.model.neutral(), DVector::zeros(6));
        let tau = DVector::from_vec(vec![0.0, 0.0, 10.0, 0.0, 0.0, 0.0]);
        let a = forward_dynamics(&r.model, &s.q, &s.v, &tau, None).unwrap();
        let exact = super::super::state::integrate(&r.model, &s, &a, 1e-3);
        let step = symplectic_step(&r.model, &s, &tau, None, 1e-3).unwrap();
        assert!((&step.v - &exact.v).amax() < 1e-12);
        assert!((&step.q - &exact.q).amax() < 1e-12);
    }
}
