use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::cost::{total_cost, CostDerivatives, CostTerm};
use super::dynamics::Dynamics;
use crate::dynamics::DynamicsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OcpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("dynamics failed: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
}

/// Multiple-shooting transcription: `N` controls, `N + 1` states, a cost list
/// per control node and a terminal cost list.
#[derive(Debug, Clone)]
pub struct OcProblem {
    pub dynamics: Arc<dyn Dynamics>,
    pub x0: DVector<f64>,
    pub dt: f64,
    pub running: Vec<Vec<CostTerm>>,
    pub terminal: Vec<CostTerm>,
}

/// Dynamics and cost derivatives at one node.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub fx: DMatrix<f64>,
    pub fu: DMatrix<f64>,
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lxu: DMatrix<f64>,
}

/// Finite-difference step on states and controls.
pub const FD_EPS: f64 = 1e-6;

impl OcProblem {
    pub fn new(
        dynamics: Arc<dyn Dynamics>,
        x0: DVector<f64>,
        dt: f64,
        running: Vec<Vec<CostTerm>>,
        terminal: Vec<CostTerm>,
    ) -> Result<Self, OcpError> {
        let bad = |m: String| Err(OcpError::InvalidProblem(m));
        if running.is_empty() {
            return bad("horizon must have at least one node".into());
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return bad(format!("dt must be > 0, got {dt}"));
        }
        if x0.len() != dynamics.nx() {
            return bad(format!("initial state has size {}, expected {}", x0.len(), dynamics.nx()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(OcpError::NonFinite(0));
        }
        for term in running.iter().flatten().chain(&terminal) {
            term.validate(dynamics.as_ref()).map_err(OcpError::InvalidProblem)?;
        }
        if terminal.iter().any(CostTerm::uses_control) {
            return bad("terminal cost cannot depend on the control".into());
        }
        Ok(Self { dynamics, x0, dt, running, terminal })
    }

    pub fn horizon(&self) -> usize {
        self.running.len()
    }

    pub fn node_cost(&self, k: usize, x: &DVector<f64>, u: Option<&DVector<f64>>) -> f64 {
        let terms = if k < self.horizon() { &self.running[k] } else { &self.terminal };
        total_cost(terms, self.dynamics.as_ref(), x, u)
    }

    /// `u` repeated over the horizon.
    pub fn constant_guess(&self, u: &DVector<f64>) -> Vec<DVector<f64>> {
        vec![u.clone(); self.horizon()]
    }
}

/// Propagates `us` from the initial state and sums the cost.
pub fn rollout(problem: &OcProblem, us: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, f64), OcpError> {
    if us.len() != problem.horizon() {
        return Err(OcpError::InvalidProblem(format!("expected {} controls, got {}", problem.horizon(), us.len())));
    }
    let dyn_ = problem.dynamics.as_ref();
    let mut xs = Vec::with_capacity(us.len() + 1);
    xs.push(problem.x0.clone());
    let mut cost = 0.0;
    for (k, u) in us.iter().enumerate() {
        if u.len() != dyn_.nu() {
            return Err(OcpError::InvalidProblem(format!("control {k} has size {}", u.len())));
        }
        cost += problem.node_cost(k, &xs[k], Some(u));
        let next = dyn_.step(&xs[k], u, problem.dt)?;
        xs.push(next);
    }
    cost += problem.node_cost(us.len(), &xs[us.len()], None);
    if !cost.is_finite() {
        return Err(OcpError::NonFinite(us.len()));
    }
    Ok((xs, cost))
}

/// Central-difference Jacobians of one dynamics step on the state tangent space.
pub fn dynamics_jacobians(
    dynamics: &dyn Dynamics,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), OcpError> {
    if let Some(jac) = dynamics.analytic_jacobians(x, u, dt) {
        return Ok(jac);
    }
    let (ndx, nu) = (dynamics.ndx(), dynamics.nu());
    let f0 = dynamics.step(x, u, dt)?;
    let mut fx = DMatrix::zeros(ndx, ndx);
    let mut fu = DMatrix::zeros(ndx, nu);
    let mut dx = DVector::zeros(ndx);
    for i in 0..ndx {
        dx[i] = FD_EPS;
        let fp = dynamics.step(&dynamics.integrate(x, &dx), u, dt)?;
        dx[i] = -FD_EPS;
        let fm = dynamics.step(&dynamics.integrate(x, &dx), u, dt)?;
        dx[i] = 0.0;
        let col = (dynamics.difference(&f0, &fp) - dynamics.difference(&f0, &fm)) / (2.0 * FD_EPS);
        fx.set_column(i, &col);
    }
    let mut up = u.clone();
    for j in 0..nu {
        up[j] = u[j] + FD_EPS;
        let fp = dynamics.step(x, &up, dt)?;
        up[j] = u[j] - FD_EPS;
        let fm = dynamics.step(x, &up, dt)?;
        up[j] = u[j];
        let col = (dynamics.difference(&f0, &fp) - dynamics.difference(&f0, &fm)) / (2.0 * FD_EPS);
        fu.set_column(j, &col);
    }
    Ok((fx, fu))
}

/// Derivatives at node `k`. At the terminal node (`k == N`) only the cost
/// terms are differentiated and `u` is ignored.
pub fn linearize(problem: &OcProblem, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<Linearization, OcpError> {
    let dyn_ = problem.dynamics.as_ref();
    let (ndx, nu) = (dyn_.ndx(), dyn_.nu());
    let mut cost = CostDerivatives::zeros(ndx, nu);
    let terminal = k >= problem.horizon();
    let (terms, control) = if terminal { (&problem.terminal, None) } else { (&problem.running[k], Some(u)) };
    for t in terms {
        t.accumulate(dyn_, x, control, FD_EPS, &mut cost);
    }
    let (fx, fu) = if terminal {
        (DMatrix::zeros(ndx, ndx), DMatrix::zeros(ndx, nu))
    } else {
        dynamics_jacobians(dyn_, x, u, problem.dt)?
    };
    let lin = Linearization { fx, fu, lx: cost.lx, lu: cost.lu, lxx: cost.lxx, luu: cost.luu, lxu: cost.lxu };
    let finite = lin.fx.iter().chain(lin.fu.iter()).chain(lin.lx.iter()).chain(lin.lxx.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(OcpError::NonFinite(k));
    }
    Ok(lin)
}
