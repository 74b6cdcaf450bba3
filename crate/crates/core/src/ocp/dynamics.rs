use std::fmt::Debug;

use nalgebra::{DMatrix, DVector, Vector3, Vector6};

use crate::actuation::{ActuatorLimits, RotorLayout, N_ROTORS};
use crate::dynamics::{
    difference_configuration, forward_dynamics, frame_pose, frame_velocity, integrate, integrate_configuration,
    DynamicsError, State,
};
use crate::robot::Robot;
use crate::spatial::Se3;

/// Discrete-time dynamics on a state manifold, as seen by the solver.
///
/// States are stored as `nx` numbers and perturbed in an `ndx`-dimensional
/// tangent space through [`Dynamics::integrate`] and [`Dynamics::difference`].
pub trait Dynamics: Debug + Send + Sync {
    fn nx(&self) -> usize;
    fn ndx(&self) -> usize;
    fn nu(&self) -> usize;
    /// State after holding `u` for `dt`.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>, DynamicsError>;
    /// `x ⊕ dx`.
    fn integrate(&self, x: &DVector<f64>, dx: &DVector<f64>) -> DVector<f64>;
    /// `x1 ⊖ x0`.
    fn difference(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> DVector<f64>;
    /// Exact `(∂f/∂dx, ∂f/∂u)` when available; finite differences otherwise.
    fn analytic_jacobians(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _dt: f64,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }
    /// Elementwise `(lower, upper)` control limits, if any.
    fn control_bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        None
    }
    /// Projects a control onto the admissible set.
    fn clamp_control(&self, u: &mut DVector<f64>) {
        if let Some((lo, hi)) = self.control_bounds() {
            for i in 0..u.len() {
                u[i] = u[i].clamp(lo[i], hi[i]);
            }
        }
    }
    /// World pose of a named frame, for models that have frames.
    fn frame_pose(&self, _x: &DVector<f64>, _frame: usize) -> Option<Se3> {
        None
    }
    /// World-aligned linear and angular velocity of a frame.
    fn frame_velocity(&self, _x: &DVector<f64>, _frame: usize) -> Option<(Vector3<f64>, Vector3<f64>)> {
        None
    }
}

/// The rigid-body platform driven by rotor thrusts and arm joint torques.
///
/// Controls are `[t1 … t6, τ_arm…]`. Thrusts act on the base through the
/// rotor layout; joint torques act on the arm joints.
#[derive(Debug, Clone)]
pub struct MultibodyDynamics {
    pub robot: Robot,
    pub layout: RotorLayout,
    pub limits: ActuatorLimits,
}

impl MultibodyDynamics {
    pub fn new(robot: Robot, layout: RotorLayout, limits: ActuatorLimits) -> Self {
        Self { robot, layout, limits }
    }

    pub fn nq(&self) -> usize {
        self.robot.model.nq
    }

    pub fn nv(&self) -> usize {
        self.robot.model.nv
    }

    pub fn split(&self, x: &DVector<f64>) -> State {
        let nq = self.nq();
        State::new(x.rows(0, nq).into_owned(), x.rows(nq, self.nv()).into_owned())
    }

    pub fn join(&self, s: &State) -> DVector<f64> {
        let mut x = DVector::zeros(self.nx());
        x.rows_mut(0, self.nq()).copy_from(&s.q);
        x.rows_mut(self.nq(), self.nv()).copy_from(&s.v);
        x
    }

    pub fn thrusts(u: &DVector<f64>) -> Vector6<f64> {
        Vector6::from_iterator(u.rows(0, N_ROTORS).iter().copied())
    }

    pub fn acceleration(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, DynamicsError> {
        let s = self.split(x);
        let torques: Vec<f64> = u.rows(N_ROTORS, u.len() - N_ROTORS).iter().copied().collect();
        let (tau, fext) = self.robot.actuation_forces(&self.layout, &Self::thrusts(u), &torques);
        forward_dynamics(&self.robot.model, &s.q, &s.v, &tau, Some(&fext))
    }
}

impl Dynamics for MultibodyDynamics {
    fn nx(&self) -> usize {
        self.nq() + self.nv()
    }

    fn ndx(&self) -> usize {
        2 * self.nv()
    }

    fn nu(&self) -> usize {
        N_ROTORS + self.robot.n_arm()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>, DynamicsError> {
        let a = self.acceleration(x, u)?;
        let next = integrate(&self.robot.model, &self.split(x), &a, dt);
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite);
        }
        Ok(self.join(&next))
    }

    fn integrate(&self, x: &DVector<f64>, dx: &DVector<f64>) -> DVector<f64> {
        let (nq, nv) = (self.nq(), self.nv());
        let mut out = DVector::zeros(nq + nv);
        let q = integrate_configuration(&self.robot.model, &x.rows(0, nq).into_owned(), &dx.rows(0, nv).into_owned());
        out.rows_mut(0, nq).copy_from(&q);
        out.rows_mut(nq, nv).copy_from(&(x.rows(nq, nv) + dx.rows(nv, nv)));
        out
    }

    fn difference(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> DVector<f64> {
        let (nq, nv) = (self.nq(), self.nv());
        let mut out = DVector::zeros(2 * nv);
        let dq =
            difference_configuration(&self.robot.model, &x0.rows(0, nq).into_owned(), &x1.rows(0, nq).into_owned());
        out.rows_mut(0, nv).copy_from(&dq);
        out.rows_mut(nv, nv).copy_from(&(x1.rows(nq, nv) - x0.rows(nq, nv)));
        out
    }

    fn control_bounds(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let nu = self.nu();
        let l = &self.limits;
        let lo = DVector::from_fn(nu, |i, _| if i < N_ROTORS { l.thrust_min } else { -l.joint_torque_limit });
        let hi = DVector::from_fn(nu, |i, _| if i < N_ROTORS { l.thrust_max } else { l.joint_torque_limit });
        Some((lo, hi))
    }

    fn frame_pose(&self, x: &DVector<f64>, frame: usize) -> Option<Se3> {
        Some(frame_pose(&self.robot.model, &x.rows(0, self.nq()).into_owned(), frame))
    }

    fn frame_velocity(&self, x: &DVector<f64>, frame: usize) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let s = self.split(x);
        Some(frame_velocity(&self.robot.model, &s.q, &s.v, frame))
    }
}

/// `x⁺ = A·x + B·u` on a Euclidean state; `dt` is ignored.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl Dynamics for LinearDynamics {
    fn nx(&self) -> usize {
        self.a.nrows()
    }

    fn ndx(&self) -> usize {
        self.a.nrows()
    }

    fn nu(&self) -> usize {
        self.b.ncols()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, _dt: f64) -> Result<DVector<f64>, DynamicsError> {
        let next = &self.a * x + &self.b * u;
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(DynamicsError::NonFinite)
        }
    }

    fn integrate(&self, x: &DVector<f64>, dx: &DVector<f64>) -> DVector<f64> {
        x + dx
    }

    fn difference(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> DVector<f64> {
        x1 - x0
    }
}
