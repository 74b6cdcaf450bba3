//! Spatial vector algebra.
//!
//! Motion and force vectors are stored as `[linear; angular]`. A motion
//! vector holds the velocity of the frame origin followed by the angular
//! velocity, a force vector holds the force followed by the moment about the
//! frame origin.

use nalgebra::{Matrix3, Matrix6, Rotation3, UnitQuaternion, Vector3, Vector6};

pub type Motion = Vector6<f64>;
pub type Force = Vector6<f64>;

#[inline]
pub fn linear(v: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

#[inline]
pub fn angular(v: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(v[3], v[4], v[5])
}

#[inline]
pub fn stack(lin: &Vector3<f64>, ang: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z)
}

#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `m1 ×ₘ m2`
#[inline]
pub fn cross_motion(m1: &Motion, m2: &Motion) -> Motion {
    let (v1, w1) = (linear(m1), angular(m1));
    let (v2, w2) = (linear(m2), angular(m2));
    stack(&(w1.cross(&v2) + v1.cross(&w2)), &w1.cross(&w2))
}

/// `m ×f f`
#[inline]
pub fn cross_force(m: &Motion, f: &Force) -> Force {
    let (v, w) = (linear(m), angular(m));
    let (fl, fa) = (linear(f), angular(f));
    stack(&w.cross(&fl), &(w.cross(&fa) + v.cross(&fl)))
}

/// Rigid transform. When used as the placement of a child frame in its parent,
/// `rotation` maps child coordinates to parent coordinates and `translation`
/// is the child origin expressed in the parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Se3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Se3 {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self { rotation, translation: Vector3::zeros() }
    }

    pub fn compose(&self, other: &Se3) -> Se3 {
        Se3 {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Se3 {
        let rt = self.rotation.transpose();
        Se3 { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    /// Child-frame motion expressed in the parent frame.
    #[inline]
    pub fn act_motion(&self, m: &Motion) -> Motion {
        let w = self.rotation * angular(m);
        let v = self.rotation * linear(m) + self.translation.cross(&w);
        stack(&v, &w)
    }

    /// Parent-frame motion expressed in the child frame.
    #[inline]
    pub fn act_inv_motion(&self, m: &Motion) -> Motion {
        let rt = self.rotation.transpose();
        let (v, w) = (linear(m), angular(m));
        stack(&(rt * (v - self.translation.cross(&w))), &(rt * w))
    }

    /// Child-frame force expressed in the parent frame.
    #[inline]
    pub fn act_force(&self, f: &Force) -> Force {
        let fl = self.rotation * linear(f);
        let fa = self.rotation * angular(f) + self.translation.cross(&fl);
        stack(&fl, &fa)
    }

    /// Parent-frame force expressed in the child frame.
    #[inline]
    pub fn act_inv_force(&self, f: &Force) -> Force {
        let rt = self.rotation.transpose();
        let (fl, fa) = (linear(f), angular(f));
        stack(&(rt * fl), &(rt * (fa - self.translation.cross(&fl))))
    }

    /// 6×6 matrix of [`Se3::act_inv_motion`]. Its transpose maps child forces to
    /// parent forces.
    pub fn inv_motion_matrix(&self) -> Matrix6<f64> {
        let rt = self.rotation.transpose();
        let mut x = Matrix6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        x.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-rt * skew(&self.translation)));
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&rt);
        x
    }
}

/// Rigid-body inertia: mass, centre of mass in the body frame and rotational
/// inertia about the centre of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia {
    pub mass: f64,
    pub com: Vector3<f64>,
    pub rotational: Matrix3<f64>,
}

impl Inertia {
    pub fn new(mass: f64, com: Vector3<f64>, rotational: Matrix3<f64>) -> Self {
        Self { mass, com, rotational }
    }

    pub fn point(mass: f64, position: Vector3<f64>) -> Self {
        Self { mass, com: position, rotational: Matrix3::zeros() }
    }

    /// 6×6 spatial inertia about the body origin.
    pub fn matrix(&self) -> Matrix6<f64> {
        let cx = skew(&self.com);
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * self.mass));
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-self.mass * cx));
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(self.mass * cx));
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(self.rotational - self.mass * cx * cx));
        m
    }

    /// The same inertia seen from a frame in which this body's frame sits at `placement`.
    pub fn transformed(&self, placement: &Se3) -> Inertia {
        Inertia {
            mass: self.mass,
            com: placement.transform_point(&self.com),
            rotational: placement.rotation * self.rotational * placement.rotation.transpose(),
        }
    }

    /// Rigidly merges two inertias expressed in the same frame.
    pub fn combine(&self, other: &Inertia) -> Inertia {
        let mass = self.mass + other.mass;
        let com = (self.com * self.mass + other.com * other.mass) / mass;
        let shift = |i: &Inertia| {
            let d = i.com - com;
            i.rotational + i.mass * (Matrix3::identity() * d.norm_squared() - d * d.transpose())
        };
        Inertia { mass, com, rotational: shift(self) + shift(other) }
    }

    /// Kinetic energy of the body moving with spatial velocity `v` (body frame).
    pub fn kinetic_energy(&self, v: &Motion) -> f64 {
        0.5 * v.dot(&(self.matrix() * v))
    }
}

/// SO(3) exponential of a rotation vector.
pub fn exp3(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// SO(3) logarithm, returned as a rotation vector.
///
/// Goes through the quaternion and `atan2`, which stays accurate for angles
/// near zero where the trace formula loses half the digits.
pub fn log3(r: &Matrix3<f64>) -> Vector3<f64> {
    log_quaternion(&UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r)))
}

/// Rotation vector of a unit quaternion, angle in `[0, π]`.
pub fn log_quaternion(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
    let s = v.norm();
    if s < 1e-300 {
        return 2.0 * v;
    }
    let theta = 2.0 * s.atan2(w);
    v * (theta / s)
}

/// Right Jacobian of the SO(3) exponential: `exp(w + δ) ≈ exp(w)·exp(Jr(w)·δ)`.
pub fn right_jacobian3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let t2 = theta * theta;
    // (1 − cos θ)/θ² and (θ − sin θ)/θ³ in cancellation-free form
    let a = if theta < 1e-8 { 0.5 } else { 2.0 * (0.5 * theta).sin().powi(2) / t2 };
    let b = if theta < 1e-2 { 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 } else { (theta - theta.sin()) / (t2 * theta) };
    Matrix3::identity() - a * k + b * k * k
}

/// Z-Y-X Euler angles `(roll, pitch, yaw)` of a rotation matrix.
pub fn euler_rpy(r: &Matrix3<f64>) -> Vector3<f64> {
    let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(*r).euler_angles();
    Vector3::new(roll, pitch, yaw)
}
