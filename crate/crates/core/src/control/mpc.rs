use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::reference::ReferenceTrajectory;
use super::ControlError;
use crate::ocp::{solve, CostTerm, Dynamics, OcProblem, Solution, SolveStatus, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcSettings {
    /// Number of control nodes.
    pub horizon: usize,
    /// Node spacing [s].
    pub dt: f64,
    /// Re-solve rate [Hz] in simulated time.
    pub rate: f64,
    /// Solver iterations per re-solve.
    pub max_iter: usize,
}

impl Default for MpcSettings {
    fn default() -> Self {
        Self { horizon: 30, dt: 0.02, rate: 100.0, max_iter: 3 }
    }
}

impl MpcSettings {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon == 0 || self.max_iter == 0 || !(self.dt > 0.0) || !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err("mpc horizon, dt, rate and max_iter must all be positive".into());
        }
        Ok(())
    }
}

/// Diagonal tracking weights, already laid out for the solver's dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingCosts {
    pub state: DVector<f64>,
    pub control: DVector<f64>,
    pub terminal: DVector<f64>,
    /// Optional frame whose reference position is tracked with the given weight.
    pub frame: Option<(usize, f64)>,
}

/// Previous controls advanced by one node, last node duplicated.
pub fn shift_guess(us: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = us.iter().skip(1).cloned().collect();
    if let Some(last) = us.last() {
        out.push(last.clone());
    }
    out
}

/// One receding-horizon solve from `x` at clock time `t`.
///
/// The horizon tracks `reference` over `[t, t + horizon·dt]`. The solver is
/// warm-started from `previous` shifted by one node when it has the right
/// length, otherwise from the reference controls. The returned solution may be
/// unconverged; its first control is always usable.
pub fn mpc_step(
    dynamics: &Arc<dyn Dynamics>,
    x: &DVector<f64>,
    t: f64,
    reference: &ReferenceTrajectory,
    previous: Option<&Solution>,
    settings: &MpcSettings,
    costs: &TrackingCosts,
) -> Result<Solution, ControlError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NonFiniteState);
    }
    let d = dynamics.as_ref();
    let n = settings.horizon;
    let node_ref = |k: usize| reference.state(d, t + k as f64 * settings.dt);
    let frame_term = |x_ref: &DVector<f64>| {
        costs.frame.map(|(frame, w)| {
            let target = d.frame_pose(x_ref, frame).expect("model has frames").translation;
            CostTerm::FrameTranslation { frame, target, weights: Vector3::repeat(w) }
        })
    };
    let mut running = Vec::with_capacity(n);
    for k in 0..n {
        let x_ref = node_ref(k);
        let mut terms = vec![
            CostTerm::State { reference: x_ref.clone(), weights: costs.state.clone() },
            CostTerm::Control {
                reference: reference.control(t + k as f64 * settings.dt),
                weights: costs.control.clone(),
            },
        ];
        terms.extend(frame_term(&x_ref));
        running.push(terms);
    }
    let x_end = node_ref(n);
    let mut terminal = vec![CostTerm::State { reference: x_end.clone(), weights: costs.terminal.clone() }];
    terminal.extend(frame_term(&x_end));
    let problem = OcProblem::new(dynamics.clone(), x.clone(), settings.dt, running, terminal)?;
    let from_reference = || (0..n).map(|k| reference.control(t + k as f64 * settings.dt)).collect::<Vec<_>>();
    let solver = SolverSettings { max_iter: settings.max_iter, ..Default::default() };
    let warm = match previous {
        Some(p) if p.us.len() == n && p.us.iter().all(|u| u.iter().all(|v| v.is_finite())) => Some(shift_guess(&p.us)),
        _ => None,
    };
    if let Some(guess) = warm {
        let sol = solve(&problem, &guess, &solver)?;
        // a stale warm start can blow up the rollout; the reference is the fallback
        if sol.status != SolveStatus::NonFinite {
            return Ok(sol);
        }
    }
    let sol = solve(&problem, &from_reference(), &solver)?;
    if sol.status == SolveStatus::NonFinite {
        return Err(ControlError::Planning { status: sol.status, iterations: sol.iterations, cost: sol.cost });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_drops_first_and_repeats_last() {
        let us: Vec<DVector<f64>> = (0..4).map(|k| DVector::from_element(2, k as f64)).collect();
        let s = shift_guess(&us);
        assert_eq!(s.len(), 4);
        for k in 1..4 {
            assert_eq!(s[k - 1], us[k]);
        }
        assert_eq!(s[3], us[3]);
        assert!(shift_guess(&[]).is_empty());
    }

    #[test]
    fn settings_reject_zero_horizon() {
        assert!(MpcSettings { horizon: 0, ..Default::default() }.validate().is_err());
        assert!(MpcSettings::default().validate().is_ok());
    }
}
