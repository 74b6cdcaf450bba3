use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};

use super::dynamics::Dynamics;
use crate::spatial::log3;

/// One weighted least-squares cost `½·Σ wᵢ·rᵢ²`.
#[derive(Debug, Clone, PartialEq)]
pub enum CostTerm {
    /// `r = x ⊖ reference`.
    State { reference: DVector<f64>, weights: DVector<f64> },
    /// `r = u − reference`.
    Control { reference: DVector<f64>, weights: DVector<f64> },
    /// World position of a frame minus the target.
    FrameTranslation { frame: usize, target: Vector3<f64>, weights: Vector3<f64> },
    /// Rotation vector of `targetᵀ·R_frame`.
    FrameOrientation { frame: usize, target: Matrix3<f64>, weights: Vector3<f64> },
    /// World-aligned `[linear; angular]` frame velocity minus the target.
    FrameVelocity { frame: usize, target: Vector6<f64>, weights: Vector6<f64> },
}

/// Gauss-Newton cost derivatives at one node.
#[derive(Debug, Clone)]
pub struct CostDerivatives {
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lxu: DMatrix<f64>,
}

impl CostDerivatives {
    pub fn zeros(ndx: usize, nu: usize) -> Self {
        Self {
            lx: DVector::zeros(ndx),
            lu: DVector::zeros(nu),
            lxx: DMatrix::zeros(ndx, ndx),
            luu: DMatrix::zeros(nu, nu),
            lxu: DMatrix::zeros(ndx, nu),
        }
    }
}

impl CostTerm {
    pub fn weights(&self) -> DVector<f64> {
        match self {
            CostTerm::State { weights, .. } | CostTerm::Control { weights, .. } => weights.clone(),
            CostTerm::FrameTranslation { weights, .. } | CostTerm::FrameOrientation { weights, .. } => {
                DVector::from_column_slice(weights.as_slice())
            }
            CostTerm::FrameVelocity { weights, .. } => DVector::from_column_slice(weights.as_slice()),
        }
    }

    pub fn uses_control(&self) -> bool {
        matches!(self, CostTerm::Control { .. })
    }

    pub fn validate(&self, dynamics: &dyn Dynamics) -> Result<(), String> {
        let w = self.weights();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(format!("cost weights must be finite and >= 0: {self:?}"));
        }
        let expected = match self {
            CostTerm::State { reference, .. } => {
                if reference.len() != dynamics.nx() {
                    return Err("state reference has the wrong size".into());
                }
                dynamics.ndx()
            }
            CostTerm::Control { reference, .. } => {
                if reference.len() != dynamics.nu() {
                    return Err("control reference has the wrong size".into());
                }
                dynamics.nu()
            }
            _ => w.len(),
        };
        if w.len() != expected {
            return Err(format!("expected {expected} weights, found {}", w.len()));
        }
        Ok(())
    }

    pub fn residual(&self, dynamics: &dyn Dynamics, x: &DVector<f64>, u: Option<&DVector<f64>>) -> DVector<f64> {
        match self {
            CostTerm::State { reference, .. } => dynamics.difference(reference, x),
            CostTerm::Control { reference, .. } => match u {
                Some(u) => u - reference,
                None => DVector::zeros(reference.len()),
            },
            CostTerm::FrameTranslation { frame, target, .. } => {
                let p = dynamics.frame_pose(x, *frame).expect("model has no frames");
                DVector::from_column_slice((p.translation - target).as_slice())
            }
            CostTerm::FrameOrientation { frame, target, .. } => {
                let p = dynamics.frame_pose(x, *frame).expect("model has no frames");
                DVector::from_column_slice(log3(&(target.transpose() * p.rotation)).as_slice())
            }
            CostTerm::FrameVelocity { frame, target, .. } => {
                let (lin, ang) = dynamics.frame_velocity(x, *frame).expect("model has no frames");
                let v = Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z);
                DVector::from_column_slice((v - target).as_slice())
            }
        }
    }

    pub fn cost(&self, dynamics: &dyn Dynamics, x: &DVector<f64>, u: Option<&DVector<f64>>) -> f64 {
        let r = self.residual(dynamics, x, u);
        0.5 * r.iter().zip(self.weights().iter()).map(|(r, w)| w * r * r).sum::<f64>()
    }

    /// Adds this term's Gauss-Newton derivatives to `out`. State Jacobians of
    /// the residual are central differences with step `eps` on the tangent space.
    pub fn accumulate(
        &self,
        dynamics: &dyn Dynamics,
        x: &DVector<f64>,
        u: Option<&DVector<f64>>,
        eps: f64,
        out: &mut CostDerivatives,
    ) {
        let w = self.weights();
        let r = self.residual(dynamics, x, u);
        let wr = r.component_mul(&w);
        if let CostTerm::Control { .. } = self {
            if u.is_some() {
                out.lu += &wr;
                for i in 0..w.len() {
                    out.luu[(i, i)] += w[i];
                }
            }
            return;
        }
        let ndx = dynamics.ndx();
        let mut rx = DMatrix::zeros(r.len(), ndx);
        let mut dx = DVector::zeros(ndx);
        for i in 0..ndx {
            dx[i] = eps;
            let rp = self.residual(dynamics, &dynamics.integrate(x, &dx), u);
            dx[i] = -eps;
            let rm = self.residual(dynamics, &dynamics.integrate(x, &dx), u);
            dx[i] = 0.0;
            rx.set_column(i, &((rp - rm) / (2.0 * eps)));
        }
        out.lx += rx.transpose() * &wr;
        let wrx = DMatrix::from_fn(r.len(), ndx, |a, b| w[a] * rx[(a, b)]);
        out.lxx += rx.transpose() * wrx;
    }
}

pub fn total_cost(terms: &[CostTerm], dynamics: &dyn Dynamics, x: &DVector<f64>, u: Option<&DVector<f64>>) -> f64 {
    terms.iter().map(|t| t.cost(dynamics, x, u)).sum()
}
