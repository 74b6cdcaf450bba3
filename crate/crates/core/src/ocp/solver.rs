use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::{linearize, rollout, Linearization, OcProblem, OcpError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Stop when the expected cost decrease of a full step falls below this.
    pub tol: f64,
    pub reg_init: f64,
    pub reg_max: f64,
    /// Multiplier applied to the regularization on failure, divisor on success.
    pub reg_factor: f64,
    /// Smallest line-search step is `2^-max_halvings`.
    pub max_halvings: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, reg_init: 1e-9, reg_max: 1e9, reg_factor: 10.0, max_halvings: 10 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol >= 0.0 && self.reg_init > 0.0 && self.reg_max >= self.reg_init && self.reg_factor > 1.0) {
            return Err("solver settings need tol >= 0, 0 < reg_init <= reg_max, reg_factor > 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// Backward pass failed or no step decreased the cost at the largest regularization.
    RegularizationLimit,
    /// NaN or infinity in the initial rollout or in the derivatives.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub xs: Vec<DVector<f64>>,
    pub us: Vec<DVector<f64>>,
    /// Feedback gains `K_k`, `nu × ndx`, applied as `u = u_k + K_k·(x ⊖ x_k)`.
    pub gains: Vec<DMatrix<f64>>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    /// Cost of the initial rollout followed by the cost after each accepted step.
    pub cost_history: Vec<f64>,
}

struct BackwardPass {
    k: Vec<DVector<f64>>,
    gains: Vec<DMatrix<f64>>,
    /// Expected decrease for a full step, `½·Σ Quᵀ·Quu⁻¹·Qu`.
    expected: f64,
}

/// Minimizes `½kᵀHk + gᵀk` over `lo ≤ k ≤ hi` by projected Newton steps on
/// the free subspace. Returns the minimizer and the free mask.
fn box_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Option<(DVector<f64>, Vec<bool>)> {
    let n = g.len();
    let value = |k: &DVector<f64>| 0.5 * k.dot(&(h * k)) + g.dot(k);
    let project = |k: &DVector<f64>| DVector::from_fn(n, |i, _| k[i].clamp(lo[i], hi[i]));
    let free_mask = |k: &DVector<f64>, grad: &DVector<f64>| -> Vec<bool> {
        (0..n).map(|i| !((k[i] <= lo[i] && grad[i] > 0.0) || (k[i] >= hi[i] && grad[i] < 0.0))).collect()
    };
    let mut k = DVector::zeros(n);
    for _ in 0..100 {
        let grad = g + h * &k;
        let free = free_mask(&k, &grad);
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        if idx.is_empty() {
            break;
        }
        let hff = h.select_rows(&idx).select_columns(&idx);
        let gf = grad.select_rows(&idx);
        if gf.amax() < 1e-12 {
            break;
        }
        let step_f = -hff.cholesky()?.solve(&gf);
        let mut dir = DVector::zeros(n);
        for (j, &i) in idx.iter().enumerate() {
            dir[i] = step_f[j];
        }
        let v0 = value(&k);
        let slope = grad.dot(&dir);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-12 {
            let trial = project(&(&k + &dir * alpha));
            if value(&trial) <= v0 + 0.1 * alpha * slope {
                moved = (&trial - &k).amax() > 0.0;
                k = trial;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let grad = g + h * &k;
    Some((k.clone(), free_mask(&k, &grad)))
}

fn backward_pass(
    lins: &[Linearization],
    us: &[DVector<f64>],
    bounds: Option<&(DVector<f64>, DVector<f64>)>,
    mu: f64,
) -> Option<BackwardPass> {
    let n = lins.len() - 1;
    let term = &lins[n];
    let mut vx = term.lx.clone();
    let mut vxx = term.lxx.clone();
    let nu = lins[0].lu.len();
    let mut k_ff = vec![DVector::zeros(nu); n];
    let mut gains = vec![DMatrix::zeros(nu, vx.len()); n];
    let (mut d1, mut d2) = (0.0, 0.0);
    for t in (0..n).rev() {
        let l = &lins[t];
        let fxt = l.fx.transpose();
        let fut = l.fu.transpose();
        let qx = &l.lx + &fxt * &vx;
        let qu = &l.lu + &fut * &vx;
        let vxx_fx = &vxx * &l.fx;
        let vxx_fu = &vxx * &l.fu;
        let qxx = &l.lxx + &fxt * &vxx_fx;
        let mut quu = &l.luu + &fut * &vxx_fu;
        let qux = l.lxu.transpose() + &fut * &vxx_fx;
        quu = 0.5 * (&quu + quu.transpose());
        for i in 0..nu {
            quu[(i, i)] += mu;
        }
        let (kt, big_k) = match bounds {
            None => {
                let chol = quu.clone().cholesky()?;
                (-chol.solve(&qu), -chol.solve(&qux))
            }
            Some((lo, hi)) => {
                let (kt, free) = box_qp(&quu, &qu, &(lo - &us[t]), &(hi - &us[t]))?;
                let idx: Vec<usize> = (0..nu).filter(|&i| free[i]).collect();
                let mut big_k = DMatrix::zeros(nu, qux.ncols());
                if !idx.is_empty() {
                    let chol = quu.select_rows(&idx).select_columns(&idx).cholesky()?;
                    let kf = -chol.solve(&qux.select_rows(&idx));
                    for (j, &i) in idx.iter().enumerate() {
                        big_k.row_mut(i).copy_from(&kf.row(j));
                    }
                }
                (kt, big_k)
            }
        };
        d1 += kt.dot(&qu);
        d2 += 0.5 * kt.dot(&(&quu * &kt));
        let kt_quu = big_k.transpose() * &quu;
        vx = &qx + &kt_quu * &kt + big_k.transpose() * &qu + qux.transpose() * &kt;
        vxx = &qxx + &kt_quu * &big_k + big_k.transpose() * &qux + qux.transpose() * &big_k;
        vxx = 0.5 * (&vxx + vxx.transpose());
        if vx.iter().chain(vxx.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        k_ff[t] = kt;
        gains[t] = big_k;
    }
    Some(BackwardPass { k: k_ff, gains, expected: -(d1 + d2) })
}

/// Rollout of the locally-controlled policy `u = ū + α·k + K·(x ⊖ x̄)`, clamped
/// to the admissible controls. `None` if any value is non-finite.
fn forward_pass(
    problem: &OcProblem,
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    bp: &BackwardPass,
    alpha: f64,
) -> Option<(Vec<DVector<f64>>, Vec<DVector<f64>>, f64)> {
    let dyn_ = problem.dynamics.as_ref();
    let n = us.len();
    let mut new_xs = Vec::with_capacity(n + 1);
    let mut new_us = Vec::with_capacity(n);
    new_xs.push(problem.x0.clone());
    let mut cost = 0.0;
    for t in 0..n {
        let dx = dyn_.difference(&xs[t], &new_xs[t]);
        let mut u = &us[t] + &bp.k[t] * alpha + &bp.gains[t] * dx;
        dyn_.clamp_control(&mut u);
        cost += problem.node_cost(t, &new_xs[t], Some(&u));
        let next = dyn_.step(&new_xs[t], &u, problem.dt).ok()?;
        new_xs.push(next);
        new_us.push(u);
        if !cost.is_finite() {
            return None;
        }
    }
    cost += problem.node_cost(n, &new_xs[n], None);
    cost.is_finite().then_some((new_xs, new_us, cost))
}

fn linearize_all(
    problem: &OcProblem,
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
) -> Result<Vec<Linearization>, OcpError> {
    let n = us.len();
    let mut out = Vec::with_capacity(n + 1);
    for t in 0..n {
        out.push(linearize(problem, t, &xs[t], &us[t])?);
    }
    out.push(linearize(problem, n, &xs[n], &us[n - 1])?);
    Ok(out)
}

/// Iterative LQR with Levenberg regularization on `Quu` and a backtracking line search.
///
/// The initial guess is clamped to the admissible controls before the first
/// rollout. Errors are returned only for malformed input; numerical failures
/// are reported through [`Solution::status`] with the best trajectory found.
pub fn solve(
    problem: &OcProblem,
    initial_guess: &[DVector<f64>],
    settings: &SolverSettings,
) -> Result<Solution, OcpError> {
    let dyn_ = problem.dynamics.as_ref();
    if initial_guess.len() != problem.horizon() {
        return Err(OcpError::InvalidProblem(format!(
            "initial guess has {} controls, horizon is {}",
            initial_guess.len(),
            problem.horizon()
        )));
    }
    settings.validate().map_err(OcpError::InvalidProblem)?;
    let mut us: Vec<DVector<f64>> = initial_guess.to_vec();
    for u in us.iter_mut() {
        if u.len() != dyn_.nu() {
            return Err(OcpError::InvalidProblem(format!("guess control has size {}", u.len())));
        }
        dyn_.clamp_control(u);
    }
    let zero_gains = || vec![DMatrix::zeros(dyn_.nu(), dyn_.ndx()); problem.horizon()];
    let flagged = |xs: Vec<DVector<f64>>, us: Vec<DVector<f64>>, cost: f64, history: Vec<f64>, iterations| Solution {
        xs,
        us,
        gains: zero_gains(),
        cost,
        iterations,
        converged: false,
        status: SolveStatus::NonFinite,
        cost_history: history,
    };
    let (mut xs, mut cost) = match rollout(problem, &us) {
        Ok(r) => r,
        Err(OcpError::InvalidProblem(m)) => return Err(OcpError::InvalidProblem(m)),
        Err(_) => {
            let xs = vec![problem.x0.clone(); problem.horizon() + 1];
            return Ok(flagged(xs, us, f64::NAN, vec![], 0));
        }
    };
    let mut history = vec![cost];
    let mut mu = settings.reg_init;
    let mut gains = zero_gains();
    let mut iterations = 0;
    let mut lins: Option<Vec<Linearization>> = None;
    let bounds = dyn_.control_bounds();

    let status = loop {
        if iterations >= settings.max_iter {
            break SolveStatus::MaxIterations;
        }
        if lins.is_none() {
            match linearize_all(problem, &xs, &us) {
                Ok(l) => lins = Some(l),
                Err(_) => {
                    let mut s = flagged(xs, us, cost, history, iterations);
                    s.gains = gains;
                    return Ok(s);
                }
            }
        }
        iterations += 1;
        let l = lins.as_ref().expect("linearized");
        let bp = loop {
            match backward_pass(l, &us, bounds.as_ref(), mu) {
                Some(bp) => break Some(bp),
                None => {
                    mu *= settings.reg_factor;
                    if mu > settings.reg_max {
                        break None;
                    }
                }
            }
        };
        let Some(bp) = bp else {
            break SolveStatus::RegularizationLimit;
        };
        gains = bp.gains.clone();
        if bp.expected < settings.tol {
            break SolveStatus::Converged;
        }
        let mut accepted = None;
        for h in 0..=settings.max_halvings {
            let alpha = 0.5f64.powi(h as i32);
            if let Some((nx, nu_, c)) = forward_pass(problem, &xs, &us, &bp, alpha) {
                if c < cost {
                    accepted = Some((nx, nu_, c));
                    break;
                }
            }
        }
        match accepted {
            Some((nx, nu_, c)) => {
                xs = nx;
                us = nu_;
                cost = c;
                history.push(c);
                lins = None;
                mu = (mu / settings.reg_factor).max(settings.reg_init);
            }
            None => {
                mu *= settings.reg_factor;
                if mu > settings.reg_max {
                    break SolveStatus::RegularizationLimit;
                }
            }
        }
    };
    Ok(Solution {
        xs,
        us,
        gains,
        cost,
        iterations,
        converged: status == SolveStatus::Converged,
        status,
        cost_history: history,
    })
}
