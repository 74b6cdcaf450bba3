//! Hexarotor thrust model and control allocation.
//!
//! A fixed-pitch hexarotor spans a 4-dimensional wrench space: collective
//! thrust along body z plus roll, pitch and yaw torques. [`allocate`] inverts
//! the 4×6 allocation matrix under per-rotor thrust limits.

use nalgebra::{DMatrix, DVector, Matrix4x6, Matrix6, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::Model;

pub const N_ROTORS: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActuationError {
    #[error("allocation matrix has rank {0}, expected 4")]
    RankDeficient(usize),
    #[error("layout must have exactly 6 rotors, found {0}")]
    RotorCount(usize),
    #[error("rotor spin directions do not cancel (sum {0})")]
    SpinImbalance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotor {
    /// Rotor centre in the base frame [m].
    pub position: Vector3<f64>,
    /// +1 or −1.
    pub spin: f64,
    /// Unit thrust direction in the base frame.
    pub axis: Vector3<f64>,
    /// Yaw torque per unit thrust [m].
    pub torque_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorLayout {
    pub rotors: Vec<Rotor>,
}

/// Geometry of a regular hexagonal layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutParams {
    /// Distance from the body z axis to each rotor axis [m]; half the 370 mm
    /// motor-to-motor diagonal.
    pub radius: f64,
    /// Angle of the first rotor from body +x [deg]. 30° puts body x between two rotors.
    pub first_rotor_angle: f64,
    /// Yaw torque-to-thrust ratio [m] (estimate, typical for 7-inch propellers).
    pub torque_ratio: f64,
    /// Height of the rotor plane in the base frame [m].
    pub height: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self { radius: 0.185, first_rotor_angle: 30.0, torque_ratio: 0.016, height: 0.0 }
    }
}

impl RotorLayout {
    /// Regular hexagon with alternating spin directions, thrust along body +z.
    pub fn hexagon(params: &LayoutParams) -> Self {
        let rotors = (0..N_ROTORS)
            .map(|i| {
                let angle = (params.first_rotor_angle + 60.0 * i as f64).to_radians();
                Rotor {
                    position: Vector3::new(params.radius * angle.cos(), params.radius * angle.sin(), params.height),
                    spin: if i % 2 == 0 { 1.0 } else { -1.0 },
                    axis: Vector3::z(),
                    torque_ratio: params.torque_ratio,
                }
            })
            .collect();
        Self { rotors }
    }

    pub fn validate(&self) -> Result<(), ActuationError> {
        if self.rotors.len() != N_ROTORS {
            return Err(ActuationError::RotorCount(self.rotors.len()));
        }
        let spin: f64 = self.rotors.iter().map(|r| r.spin).sum();
        if spin != 0.0 {
            return Err(ActuationError::SpinImbalance(spin));
        }
        Ok(())
    }

    /// Full body-frame wrench `[force; torque]` produced by unit thrust on each rotor.
    pub fn wrench_matrix(&self) -> Matrix6<f64> {
        let mut w = Matrix6::zeros();
        for (i, r) in self.rotors.iter().enumerate() {
            let torque = r.position.cross(&r.axis) + r.axis * (r.spin * r.torque_ratio);
            w.fixed_view_mut::<3, 1>(0, i).copy_from(&r.axis);
            w.fixed_view_mut::<3, 1>(3, i).copy_from(&torque);
        }
        w
    }

    /// Allocation matrix without the rank check.
    pub fn raw_allocation_matrix(&self) -> Matrix4x6<f64> {
        let w = self.wrench_matrix();
        let mut b = Matrix4x6::zeros();
        b.row_mut(0).copy_from(&w.row(2));
        b.row_mut(1).copy_from(&w.row(3));
        b.row_mut(2).copy_from(&w.row(4));
        b.row_mut(3).copy_from(&w.row(5));
        b
    }
}

/// Per-rotor thrust and joint torque envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorLimits {
    /// Minimum rotor thrust [N].
    pub thrust_min: f64,
    /// Maximum rotor thrust [N].
    pub thrust_max: f64,
    /// Fraction of the thrust range sustainable continuously.
    pub continuous_fraction: f64,
    /// Symmetric joint torque limit [N·m].
    pub joint_torque_limit: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self { thrust_min: 0.0, thrust_max: 20.0, continuous_fraction: 0.85, joint_torque_limit: 2.7 }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.thrust_min >= 0.0 && self.thrust_min < self.thrust_max) {
            return Err("thrust range must satisfy 0 <= min < max".into());
        }
        if !(self.continuous_fraction > 0.0 && self.continuous_fraction <= 1.0) {
            return Err("continuous_fraction must lie in (0, 1]".into());
        }
        if !(self.joint_torque_limit >= 0.0) {
            return Err("joint_torque_limit must be >= 0".into());
        }
        Ok(())
    }

    pub fn max_total_thrust(&self) -> f64 {
        self.thrust_max * N_ROTORS as f64
    }

    pub fn clamp_thrust(&self, t: f64) -> f64 {
        t.clamp(self.thrust_min, self.thrust_max)
    }

    pub fn clamp_torque(&self, tau: f64) -> f64 {
        tau.clamp(-self.joint_torque_limit, self.joint_torque_limit)
    }
}

/// Collective thrust along body z and body torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchCommand {
    pub collective: f64,
    pub torque: Vector3<f64>,
}

impl WrenchCommand {
    pub fn new(collective: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { collective, torque: Vector3::new(roll, pitch, yaw) }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.collective, self.torque.x, self.torque.y, self.torque.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_vector().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub thrusts: Vector6<f64>,
    /// The returned thrusts reproduce the requested wrench exactly.
    pub feasible: bool,
}

pub fn allocation_matrix(layout: &RotorLayout) -> Result<Matrix4x6<f64>, ActuationError> {
    let b = layout.raw_allocation_matrix();
    let rank = b.rank(1e-9);
    if rank < 4 {
        return Err(ActuationError::RankDeficient(rank));
    }
    Ok(b)
}

pub fn thrusts_to_wrench(thrusts: &Vector6<f64>, layout: &RotorLayout) -> WrenchCommand {
    WrenchCommand::from_vector(&(layout.raw_allocation_matrix() * thrusts))
}

/// Collective equal to `fraction` of the model weight, zero torques.
pub fn wrench_for_gravity_fraction(model: &Model, fraction: f64) -> WrenchCommand {
    WrenchCommand::new(fraction * model.total_mass() * model.gravity.norm(), 0.0, 0.0, 0.0)
}

/// Thrusts realising `wrench` under the rotor limits.
///
/// Returns the minimum-norm exact solution when one exists inside the limits.
/// Otherwise yaw is given up first (collective, roll and pitch kept exact),
/// then roll and pitch (collective kept exact), then collective; the result is
/// flagged infeasible. Output thrusts always lie within the limits.
pub fn allocate(wrench: &WrenchCommand, layout: &RotorLayout, limits: &ActuatorLimits) -> Allocation {
    let b = layout.raw_allocation_matrix();
    let lo = limits.thrust_min;
    let hi = limits.thrust_max;
    let w = wrench.as_vector();
    if !wrench.is_finite() {
        return Allocation { thrusts: Vector6::repeat(lo), feasible: false };
    }
    let clamp = |t: DVector<f64>| Vector6::from_iterator(t.iter().map(|x| x.clamp(lo, hi)));

    if let Ok(pinv) = b.pseudo_inverse(1e-12) {
        let t = pinv * w;
        if t.iter().all(|&x| x >= lo && x <= hi) {
            return Allocation { thrusts: t, feasible: true };
        }
    }

    let bd = DMatrix::from_fn(4, N_ROTORS, |r, c| b[(r, c)]);
    let wv = DVector::from_column_slice(w.as_slice());
    let lo_v = DVector::repeat(N_ROTORS, lo);
    let hi_v = DVector::repeat(N_ROTORS, hi);
    let eps = 1e-9;

    // Soft rows: Σ weight·(row·t − target)² + eps·|t|², in ½xᵀHx + gᵀx form.
    let soft = |rows: &[(usize, f64)]| {
        let mut h = DMatrix::identity(N_ROTORS, N_ROTORS) * eps;
        let mut g = DVector::zeros(N_ROTORS);
        for &(r, weight) in rows {
            let br = bd.row(r).transpose();
            h += &br * br.transpose() * weight;
            g -= br * (weight * w[r]);
        }
        (h, g)
    };

    // full wrench exact, minimum norm
    if let Some((x0, fixed)) = feasible_vertex(&bd, &wv, lo, hi) {
        let h = DMatrix::identity(N_ROTORS, N_ROTORS);
        let t = active_set_qp(&h, &DVector::zeros(N_ROTORS), &bd, &wv, &lo_v, &hi_v, x0, fixed);
        return Allocation { thrusts: clamp(t), feasible: true };
    }
    // collective, roll and pitch exact
    let a3 = bd.rows(0, 3).into_owned();
    let b3 = wv.rows(0, 3).into_owned();
    if let Some((x0, fixed)) = feasible_vertex(&a3, &b3, lo, hi) {
        let (h, g) = soft(&[(3, 1.0)]);
        let t = active_set_qp(&h, &g, &a3, &b3, &lo_v, &hi_v, x0, fixed);
        return Allocation { thrusts: clamp(t), feasible: false };
    }
    // collective exact
    let n = N_ROTORS as f64;
    let (h, g) = soft(&[(1, 1e3), (2, 1e3), (3, 1.0)]);
    if w[0] >= n * lo && w[0] <= n * hi {
        let share = w[0] / n;
        let x0 = DVector::repeat(N_ROTORS, share);
        let fixed = if share > lo && share < hi {
            vec![None; N_ROTORS]
        } else {
            let bound = if share <= lo { Bound::Lower } else { Bound::Upper };
            (0..N_ROTORS).map(|i| if i == 0 { None } else { Some(bound) }).collect()
        };
        let t =
            active_set_qp(&h, &g, &bd.rows(0, 1).into_owned(), &wv.rows(0, 1).into_owned(), &lo_v, &hi_v, x0, fixed);
        return Allocation { thrusts: clamp(t), feasible: false };
    }
    let (h, g) = soft(&[(0, 1e6), (1, 1e3), (2, 1e3), (3, 1.0)]);
    let share = (w[0] / n).clamp(lo, hi);
    let x0 = DVector::repeat(N_ROTORS, share);
    let fixed = (0..N_ROTORS)
        .map(|_| {
            if share == lo {
                Some(Bound::Lower)
            } else if share == hi {
                Some(Bound::Upper)
            } else {
                None
            }
        })
        .collect();
    let empty = DMatrix::zeros(0, N_ROTORS);
    let t = active_set_qp(&h, &g, &empty, &DVector::zeros(0), &lo_v, &hi_v, x0, fixed);
    Allocation { thrusts: clamp(t), feasible: false }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bound {
    Lower,
    Upper,
}

/// A vertex of `{x : Ax = b, lo ≤ x ≤ hi}` together with the bounds that
/// define it, or `None` when the set is empty.
fn feasible_vertex(a: &DMatrix<f64>, b: &DVector<f64>, lo: f64, hi: f64) -> Option<(DVector<f64>, Vec<Option<Bound>>)> {
    let (m, n) = a.shape();
    let tol = 1e-12 * (1.0 + hi.abs());
    // every choice of m basic variables and bound assignment for the rest
    for basis in 0u32..(1 << n) {
        if basis.count_ones() as usize != m {
            continue;
        }
        let basic: Vec<usize> = (0..n).filter(|&i| basis & (1 << i) != 0).collect();
        let nonbasic: Vec<usize> = (0..n).filter(|&i| basis & (1 << i) == 0).collect();
        let ab = DMatrix::from_fn(m, m, |r, c| a[(r, basic[c])]);
        let Some(lu) = Some(ab.lu()).filter(|lu| lu.is_invertible()) else {
            continue;
        };
        for pattern in 0u32..(1 << nonbasic.len()) {
            let mut x = DVector::zeros(n);
            let mut fixed = vec![None; n];
            for (k, &i) in nonbasic.iter().enumerate() {
                let upper = pattern & (1 << k) != 0;
                x[i] = if upper { hi } else { lo };
                fixed[i] = Some(if upper { Bound::Upper } else { Bound::Lower });
            }
            let rhs = b - a * &x;
            let Some(xb) = lu.solve(&rhs) else { continue };
            if xb.iter().all(|&v| v >= lo - tol && v <= hi + tol) {
                for (k, &i) in basic.iter().enumerate() {
                    x[i] = xb[k].clamp(lo, hi);
                }
                return Some((x, fixed));
            }
        }
    }
    None
}

/// Primal active-set method for `min ½xᵀHx + gᵀx  s.t.  Ax = b, lo ≤ x ≤ hi`
/// with `H` positive definite, started from a feasible `x` whose working set
/// `fixed` is linearly independent of the rows of `A`.
#[allow(clippy::too_many_arguments)]
fn active_set_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    mut x: DVector<f64>,
    mut fixed: Vec<Option<Bound>>,
) -> DVector<f64> {
    let n = x.len();
    let m = a.nrows();
    debug_assert_eq!(b.len(), m);
    for _ in 0..50 {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let nf = free.len();
        let grad = h * &x + g;
        let mut kkt = DMatrix::zeros(nf + m, nf + m);
        let mut rhs = DVector::zeros(nf + m);
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                kkt[(r, c)] = h[(i, j)];
            }
            for k in 0..m {
                kkt[(r, nf + k)] = a[(k, i)];
                kkt[(nf + k, r)] = a[(k, i)];
            }
            rhs[r] = -grad[i];
        }
        let sol = if nf + m == 0 {
            DVector::zeros(0)
        } else {
            match kkt.lu().solve(&rhs) {
                Some(sol) => sol,
                None => return x,
            }
        };
        let mut p = DVector::zeros(n);
        for (r, &i) in free.iter().enumerate() {
            p[i] = sol[r];
        }
        let scale = 1.0 + x.amax();
        if p.amax() <= 1e-13 * scale {
            // stationary on the working set: check bound multipliers
            let lambda = sol.rows(nf, m);
            let reduced = &grad + a.transpose() * lambda;
            let mut worst = None;
            let mut worst_val = -1e-12 * (1.0 + grad.amax());
            for i in 0..n {
                let mu = match fixed[i] {
                    Some(Bound::Lower) => reduced[i],
                    Some(Bound::Upper) => -reduced[i],
                    None => continue,
                };
                if mu < worst_val {
                    worst_val = mu;
                    worst = Some(i);
                }
            }
            match worst {
                Some(i) => fixed[i] = None,
                None => return x,
            }
            continue;
        }
        // longest step along p that stays inside the box
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            let limit = if p[i] < 0.0 {
                (lo[i] - x[i]) / p[i]
            } else if p[i] > 0.0 {
                (hi[i] - x[i]) / p[i]
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit.max(0.0);
                blocking = Some((i, if p[i] < 0.0 { Bound::Lower } else { Bound::Upper }));
            }
        }
        x += &p * alpha;
        if let Some((i, bound)) = blocking {
            x[i] = match bound {
                Bound::Lower => lo[i],
                Bound::Upper => hi[i],
            };
            fixed[i] = Some(bound);
        }
    }
    x
}

/// First-order lag between commanded and produced rotor thrust.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorLag {
    pub time_constant: f64,
    pub thrusts: Vector6<f64>,
}

impl RotorLag {
    pub fn new(time_constant: f64, initial: Vector6<f64>) -> Self {
        Self { time_constant, thrusts: initial }
    }

    /// Exact discretization over `dt` for a held command.
    pub fn step(&mut self, command: &Vector6<f64>, dt: f64) -> Vector6<f64> {
        if self.time_constant <= 0.0 {
            self.thrusts = *command;
        } else {
            let alpha = 1.0 - (-dt / self.time_constant).exp();
            self.thrusts += (command - self.thrusts) * alpha;
        }
        self.thrusts
    }
}
