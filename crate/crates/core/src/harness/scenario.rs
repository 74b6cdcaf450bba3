use std::sync::Arc;

use nalgebra::Vector3;

use super::config::{Axis, ScenarioConfig, ScenarioKind};
use super::metrics::{extract_metrics, MetricsReport};
use super::HarnessError;
use crate::actuation::RotorLayout;
use crate::control::{
    equilibrium_control, hover_state, plan_with_solution, run_closed_loop, Controller, JumpController, MpcController,
    Plant, ReferenceTrajectory, RunLog, Task, TrackingCosts,
};
use crate::dynamics::State;
use crate::ocp::{MultibodyDynamics, Solution};
use crate::robot::{Robot, Variant};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub log: RunLog,
    pub report: MetricsReport,
}

/// Everything a run needs before the loop starts.
#[derive(Debug, Clone)]
pub struct Setup {
    pub dynamics: Arc<MultibodyDynamics>,
    pub initial: State,
    /// Reference tracked by the MPC; `None` for the jump.
    pub reference: Option<ReferenceTrajectory>,
    /// Solver output of the offline plan, when there is one.
    pub plan: Option<Solution>,
}

/// Platform model for the scenario: guided for the jump, welded arm for a
/// locked tail, free flyer otherwise.
pub fn build_dynamics(config: &ScenarioConfig) -> Result<MultibodyDynamics, HarnessError> {
    let mut params = config.robot.clone();
    let variant = match config.scenario {
        ScenarioKind::TailDisplacement => {
            let s = config.tail_displacement.as_ref().expect("section present");
            params.tip_mass = s.tail_mass;
            if s.tail_locked {
                Variant::Locked([0.0, 0.0])
            } else {
                Variant::Full
            }
        }
        ScenarioKind::JumpFly => Variant::Guided,
        ScenarioKind::EeHold | ScenarioKind::HoverRegulation => Variant::Full,
    };
    let robot = Robot::new(params, variant)?;
    Ok(MultibodyDynamics::new(robot, RotorLayout::hexagon(&config.layout), config.limits.clone()))
}

pub fn tracking_costs(config: &ScenarioConfig, d: &MultibodyDynamics) -> TrackingCosts {
    let t = &config.tracking;
    let state = t.state.vector(d);
    let frame = (t.end_effector > 0.0).then_some((d.robot.end_effector, t.end_effector));
    TrackingCosts { terminal: &state * t.terminal_scale, state, control: t.control.vector(d), frame }
}

/// Builds the model, plans the reference and picks the initial state.
pub fn setup(config: &ScenarioConfig) -> Result<Setup, HarnessError> {
    config.validate()?;
    let d = Arc::new(build_dynamics(config)?);
    let robot = &d.robot;
    let at_rest = |p: Vector3<f64>| State::at_rest(&robot.model, robot.configuration(p, [0.0, 0.0]));
    let planned = |task: Task| -> Result<_, HarnessError> {
        let (reference, sol) = plan_with_solution(&task, &d, &config.planner)?;
        Ok((at_rest(task.start()), Some(reference), Some(sol)))
    };
    let (initial, reference, plan) = match config.scenario {
        ScenarioKind::HoverRegulation => {
            let s = config.hover_regulation.as_ref().expect("section present");
            let target = Vector3::new(0.0, 0.0, s.altitude);
            let x = hover_state(&d, target);
            let u = equilibrium_control(&d, &x.rows(0, d.nq()).into_owned());
            let reference = ReferenceTrajectory::constant(x, u, config.duration());
            (at_rest(target - Vector3::new(0.0, 0.0, s.offset)), Some(reference), None)
        }
        ScenarioKind::TailDisplacement => {
            let s = config.tail_displacement.as_ref().expect("section present");
            let direction = match s.axis {
                Axis::X => Vector3::x(),
                Axis::Y => Vector3::y(),
            };
            planned(Task::Displacement {
                start: Vector3::new(0.0, 0.0, s.altitude),
                offset: direction * s.distance,
                travel_time: s.travel_time,
                hold_time: s.hold_time,
            })?
        }
        ScenarioKind::EeHold => {
            let s = config.ee_hold.as_ref().expect("section present");
            planned(Task::HandHold {
                start: Vector3::new(0.0, 0.0, s.altitude),
                tilt: s.tilt.to_radians(),
                approach_time: s.approach_time,
                hold_time: s.hold,
                recover_time: s.recover_time,
            })?
        }
        ScenarioKind::JumpFly => {
            let params = config.jump_fly.as_ref().expect("section present").params();
            (JumpController::initial_state(&d, &params, &config.plant.contact), None, None)
        }
    };
    Ok(Setup { dynamics: d, initial, reference, plan })
}

/// Sets up, runs the closed loop and extracts the metrics. Divergence is
/// reported in the log status and fails the report; it is not an error.
pub fn run(config: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    Ok(run_setup(config, setup(config)?))
}

/// [`run`] from an existing [`setup`] of the same config.
pub fn run_setup(config: &ScenarioConfig, setup: Setup) -> Outcome {
    let Setup { dynamics: d, initial, reference, .. } = setup;
    let plant = Plant { dynamics: (*d).clone(), params: config.plant.clone() };
    let mut controller: Box<dyn Controller> = match reference {
        Some(reference) => Box::new(MpcController::new(
            d.clone(),
            reference,
            config.mpc.clone(),
            tracking_costs(config, &d),
            config.gains.clone(),
            config.plant.dt,
        )),
        None => {
            let params = config.jump_fly.as_ref().expect("section present").params();
            Box::new(JumpController::new((*d).clone(), params))
        }
    };
    let log = run_closed_loop(&plant, controller.as_mut(), initial, config.duration());
    let report = extract_metrics(&log.rows, config);
    Outcome { log, report }
}
