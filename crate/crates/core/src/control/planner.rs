use std::sync::Arc;

use nalgebra::{DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::reference::ReferenceTrajectory;
use super::ControlError;
use crate::actuation::{allocate, WrenchCommand, N_ROTORS};
use crate::dynamics::{inverse_dynamics, State};
use crate::ocp::{solve, CostTerm, Dynamics, MultibodyDynamics, OcProblem, Solution, SolverSettings};
use crate::spatial::exp3;

/// Per-group diagonal weights on the state tangent `[dq; dv]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateWeights {
    pub position: f64,
    pub orientation: f64,
    pub joint: f64,
    pub linear_velocity: f64,
    pub angular_velocity: f64,
    pub joint_velocity: f64,
}

impl Default for StateWeights {
    fn default() -> Self {
        Self {
            position: 0.0,
            orientation: 100.0,
            joint: 1.0,
            linear_velocity: 0.1,
            angular_velocity: 1.0,
            joint_velocity: 0.1,
        }
    }
}

impl StateWeights {
    pub fn vector(&self, d: &MultibodyDynamics) -> DVector<f64> {
        let nv = d.nv();
        let n_arm = d.robot.n_arm();
        let n_base = nv - n_arm;
        let mut w = DVector::zeros(2 * nv);
        for i in 0..n_base {
            let rotational = n_base == 6 && i >= 3;
            w[i] = if rotational { self.orientation } else { self.position };
            w[nv + i] = if rotational { self.angular_velocity } else { self.linear_velocity };
        }
        for i in n_base..nv {
            w[i] = self.joint;
            w[nv + i] = self.joint_velocity;
        }
        w
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.position,
            self.orientation,
            self.joint,
            self.linear_velocity,
            self.angular_velocity,
            self.joint_velocity,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err("state weights must be finite and >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlWeights {
    pub thrust: f64,
    pub torque: f64,
}

impl Default for ControlWeights {
    fn default() -> Self {
        Self { thrust: 1.0, torque: 0.01 }
    }
}

impl ControlWeights {
    pub fn vector(&self, d: &MultibodyDynamics) -> DVector<f64> {
        DVector::from_fn(d.nu(), |i, _| if i < N_ROTORS { self.thrust } else { self.torque })
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.thrust.is_finite() && self.thrust >= 0.0 && self.torque.is_finite() && self.torque >= 0.0) {
            return Err("control weights must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Offline planner weights and discretization. All weights are estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSettings {
    pub dt: f64,
    pub state: StateWeights,
    pub control: ControlWeights,
    /// Base position weight while holding a waypoint.
    pub waypoint: f64,
    /// End-effector linear velocity weight during a hand hold.
    pub hand_velocity: f64,
    /// End-effector position weight anchoring the hand in the refinement pass.
    pub hand_position: f64,
    /// Base orientation weight during a hand hold.
    pub tilt: f64,
    /// Multiplier on the state weights at the final node.
    pub terminal_scale: f64,
    pub solver: SolverSettings,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            dt: 0.02,
            state: StateWeights::default(),
            control: ControlWeights::default(),
            waypoint: 1e3,
            hand_velocity: 1e4,
            hand_position: 3e7,
            tilt: 3e4,
            terminal_scale: 10.0,
            solver: SolverSettings { max_iter: 300, ..Default::default() },
        }
    }
}

impl PlanSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("dt must be > 0".into());
        }
        for (name, w) in [
            ("waypoint", self.waypoint),
            ("hand_velocity", self.hand_velocity),
            ("hand_position", self.hand_position),
            ("tilt", self.tilt),
            ("terminal_scale", self.terminal_scale),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!("{name} must be finite and >= 0"));
            }
        }
        self.state.validate()?;
        self.control.validate()?;
        self.solver.validate()
    }
}

/// What the offline planner should produce. Positions are world coordinates
/// of the base frame; the motion starts and ends at rest in hover.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    /// Stay at `position` for `duration` seconds.
    Hover { position: Vector3<f64>, duration: f64 },
    /// Fly by `offset`, hold, fly back, hold. Each leg lasts `travel_time`,
    /// each hold `hold_time`.
    Displacement { start: Vector3<f64>, offset: Vector3<f64>, travel_time: f64, hold_time: f64 },
    /// Pitch the base by `tilt` [rad] while the hand stays still for
    /// `hold_time`, after `approach_time`; then recover over `recover_time`.
    HandHold { start: Vector3<f64>, tilt: f64, approach_time: f64, hold_time: f64, recover_time: f64 },
}

impl Task {
    pub fn start(&self) -> Vector3<f64> {
        match self {
            Task::Hover { position, .. } => *position,
            Task::Displacement { start, .. } | Task::HandHold { start, .. } => *start,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Task::Hover { duration, .. } => *duration,
            Task::Displacement { travel_time, hold_time, .. } => 2.0 * (travel_time + hold_time),
            Task::HandHold { approach_time, hold_time, recover_time, .. } => approach_time + hold_time + recover_time,
        }
    }
}

/// Controls that keep `q` at rest: joint torques from inverse dynamics and
/// thrusts allocated for the base wrench.
pub fn equilibrium_control(d: &MultibodyDynamics, q: &DVector<f64>) -> DVector<f64> {
    let model = &d.robot.model;
    let zero = DVector::zeros(model.nv);
    let tau = inverse_dynamics(model, q, &zero, &zero, None);
    let n_arm = d.robot.n_arm();
    let n_base = model.nv - n_arm;
    let wrench = if n_base == 6 {
        WrenchCommand::new(tau[2], tau[3], tau[4], tau[5])
    } else {
        WrenchCommand::new(tau[0], 0.0, 0.0, 0.0)
    };
    let alloc = allocate(&wrench, &d.layout, &d.limits);
    let mut u = DVector::zeros(d.nu());
    u.rows_mut(0, N_ROTORS).copy_from(&alloc.thrusts);
    for (k, &i) in d.robot.arm_indices().iter().enumerate() {
        u[N_ROTORS + k] = tau[i];
    }
    u
}

/// Hover state at `position` with the arm at its zero posture.
pub fn hover_state(d: &MultibodyDynamics, position: Vector3<f64>) -> DVector<f64> {
    let q = d.robot.configuration(position, [0.0, 0.0]);
    d.join(&State::at_rest(&d.robot.model, q))
}

fn nodes(duration: f64, dt: f64) -> usize {
    (duration / dt).round().max(1.0) as usize
}

/// Builds the phase-structured problem for `task` and solves it to convergence.
pub fn plan(
    task: &Task,
    dynamics: &Arc<MultibodyDynamics>,
    settings: &PlanSettings,
) -> Result<ReferenceTrajectory, ControlError> {
    plan_with_solution(task, dynamics, settings).map(|(reference, _)| reference)
}

/// [`plan`], also returning the final solver output.
pub fn plan_with_solution(
    task: &Task,
    dynamics: &Arc<MultibodyDynamics>,
    settings: &PlanSettings,
) -> Result<(ReferenceTrajectory, Solution), ControlError> {
    settings.validate().map_err(ControlError::InvalidSettings)?;
    let d = dynamics.as_ref();
    let x_start = hover_state(d, task.start());
    let u_hover = equilibrium_control(d, &x_start.rows(0, d.nq()).into_owned());
    let ws = settings.state.vector(d);
    let wu = settings.control.vector(d);
    let regularization = |reference: &DVector<f64>| {
        vec![
            CostTerm::State { reference: reference.clone(), weights: ws.clone() },
            CostTerm::Control { reference: u_hover.clone(), weights: wu.clone() },
        ]
    };
    let base = d.robot.base_frame();
    let at = |p: Vector3<f64>| CostTerm::FrameTranslation {
        frame: base,
        target: p,
        weights: Vector3::repeat(settings.waypoint),
    };
    let terminal_at = |x: &DVector<f64>| {
        let mut w = &ws * settings.terminal_scale;
        let nv = d.nv();
        let n_base = nv - d.robot.n_arm();
        w.rows_mut(0, n_base.min(3)).fill(settings.waypoint);
        vec![CostTerm::State { reference: x.clone(), weights: w }]
    };

    let dt = settings.dt;
    let (running, terminal) = match task {
        Task::Hover { duration, .. } => {
            let n = nodes(*duration, dt);
            let mut r = regularization(&x_start);
            r.push(at(task.start()));
            (vec![r; n], terminal_at(&x_start))
        }
        Task::Displacement { start, offset, travel_time, hold_time } => {
            let (nt, nh) = (nodes(*travel_time, dt), nodes(*hold_time, dt));
            let goal = start + offset;
            let mut running = Vec::with_capacity(2 * (nt + nh));
            for (n, target) in [(nt, None), (nh, Some(goal)), (nt, None), (nh, Some(*start))] {
                for _ in 0..n {
                    let mut r = regularization(&x_start);
                    if let Some(p) = target {
                        r.push(at(p));
                    }
                    running.push(r);
                }
            }
            (running, terminal_at(&x_start))
        }
        Task::HandHold { start, tilt, approach_time, hold_time, recover_time } => {
            let (na, nh, nr) = (nodes(*approach_time, dt), nodes(*hold_time, dt), nodes(*recover_time, dt));
            let ee = d.robot.end_effector;
            let tilted = exp3(&Vector3::new(0.0, *tilt, 0.0));
            let build = |anchor: Option<Vector3<f64>>| {
                let mut running = Vec::with_capacity(na + nh + nr);
                running.extend(std::iter::repeat_n(regularization(&x_start), na));
                let mut hold = regularization(&x_start);
                let wv = settings.hand_velocity;
                hold.push(CostTerm::FrameVelocity {
                    frame: ee,
                    target: Vector6::zeros(),
                    weights: Vector6::new(wv, wv, wv, 0.0, 0.0, 0.0),
                });
                hold.push(CostTerm::FrameOrientation {
                    frame: base,
                    target: tilted,
                    weights: Vector3::repeat(settings.tilt),
                });
                if let Some(p) = anchor {
                    hold.push(CostTerm::FrameTranslation {
                        frame: ee,
                        target: p,
                        weights: Vector3::repeat(settings.hand_position),
                    });
                }
                running.extend(std::iter::repeat_n(hold, nh + 1));
                let mut recover = regularization(&x_start);
                recover.push(at(*start));
                running.extend(std::iter::repeat_n(regularization(&x_start), nr.saturating_sub(nr / 3 + 1)));
                running.extend(std::iter::repeat_n(recover, nr / 3));
                running
            };
            // first pass finds where the hand can stay; the second pins it there
            let first = OcProblem::new(
                dynamics.clone() as Arc<dyn Dynamics>,
                x_start.clone(),
                dt,
                build(None),
                terminal_at(&x_start),
            )?;
            let sol = solve(&first, &first.constant_guess(&u_hover), &settings.solver)?;
            if !sol.converged {
                return Err(ControlError::Planning { status: sol.status, iterations: sol.iterations, cost: sol.cost });
            }
            let window = &sol.xs[na..=na + nh];
            let anchor =
                window.iter().map(|x| d.frame_pose(x, ee).expect("model has frames").translation).sum::<Vector3<f64>>()
                    / window.len() as f64;
            let problem = OcProblem::new(
                dynamics.clone() as Arc<dyn Dynamics>,
                x_start.clone(),
                dt,
                build(Some(anchor)),
                terminal_at(&x_start),
            )?;
            return finish(&problem, &sol.us, &settings.solver, dt);
        }
    };
    let problem = OcProblem::new(dynamics.clone() as Arc<dyn Dynamics>, x_start, dt, running, terminal)?;
    finish(&problem, &problem.constant_guess(&u_hover), &settings.solver, dt)
}

fn finish(
    problem: &OcProblem,
    guess: &[DVector<f64>],
    solver: &SolverSettings,
    dt: f64,
) -> Result<(ReferenceTrajectory, Solution), ControlError> {
    let sol = solve(problem, guess, solver)?;
    if !sol.converged {
        return Err(ControlError::Planning { status: sol.status, iterations: sol.iterations, cost: sol.cost });
    }
    Ok((ReferenceTrajectory::uniform(dt, sol.xs.clone(), sol.us.clone())?, sol))
}
