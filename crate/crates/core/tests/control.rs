use std::sync::Arc;

use borinot_core::actuation::{ActuatorLimits, LayoutParams, RotorLayout};
use borinot_core::control::*;
use borinot_core::dynamics::State;
use borinot_core::harness::{self, ScenarioConfig, ScenarioKind};
use borinot_core::ocp::{Dynamics, MultibodyDynamics};
use borinot_core::robot::{Robot, RobotParams, Variant};
use nalgebra::{DVector, Vector3, Vector6};

fn dynamics(variant: Variant) -> Arc<MultibodyDynamics> {
    let robot = Robot::new(RobotParams::default(), variant).unwrap();
    Arc::new(MultibodyDynamics::new(robot, RotorLayout::hexagon(&LayoutParams::default()), ActuatorLimits::default()))
}

fn plant(d: &MultibodyDynamics) -> Plant {
    Plant { dynamics: d.clone(), params: PlantParams::default() }
}

fn hover_command(u: &DVector<f64>) -> ControlCommand {
    ControlCommand {
        thrusts: MultibodyDynamics::thrusts(u),
        torques: u.rows(6, u.len() - 6).into_owned(),
        thrust_saturated: false,
        torque_saturated: false,
    }
}

#[test]
fn zero_thrust_falls_ballistically() {
    let d = dynamics(Variant::Full);
    let q = d.robot.configuration(Vector3::new(0.0, 0.0, 10.0), [0.0, 0.0]);
    let mut idle = OpenLoop(ControlCommand {
        thrusts: Vector6::zeros(),
        torques: DVector::zeros(2),
        thrust_saturated: false,
        torque_saturated: false,
    });
    let log = run_closed_loop(&plant(&d), &mut idle, State::at_rest(&d.robot.model, q), 1.0);
    assert!(log.completed());
    let dz = log.rows.last().unwrap().q[2] - 10.0;
    // −½·g·t²
    assert!((dz + 4.903325).abs() < 0.005 * 4.903325, "dz = {dz}");
    assert!(log.rows.iter().all(|r| r.contact_force == 0.0));
}

#[test]
fn equilibrium_thrusts_hold_the_hover() {
    let d = dynamics(Variant::Full);
    let x = hover_state(&d, Vector3::new(0.0, 0.0, 1.0));
    let u = equilibrium_control(&d, &x.rows(0, d.nq()).into_owned());
    for t in MultibodyDynamics::thrusts(&u).iter() {
        // 120 / (6·5.2)
        assert!((t - 3.8461538461538463).abs() < 1e-6);
    }
    let mut hold = OpenLoop(hover_command(&u));
    let log = run_closed_loop(&plant(&d), &mut hold, d.split(&x), 1.0);
    let last = log.rows.last().unwrap();
    assert!((last.q[2] - 1.0).abs() < 1e-6 && last.q[0].abs() < 1e-9, "{:?}", last.q);
}

fn hover_reference(d: &MultibodyDynamics) -> (DVector<f64>, DVector<f64>, ReferenceTrajectory) {
    let x = hover_state(d, Vector3::new(0.0, 0.0, 1.0));
    let u = equilibrium_control(d, &x.rows(0, d.nq()).into_owned());
    let r = ReferenceTrajectory::constant(x.clone(), u.clone(), 5.0);
    (x, u, r)
}

fn costs(d: &MultibodyDynamics) -> TrackingCosts {
    let config = ScenarioConfig::default_for(ScenarioKind::HoverRegulation);
    harness::tracking_costs(&config, d)
}

#[test]
fn mpc_on_reference_returns_hover_controls() {
    let d = dynamics(Variant::Full);
    let (x, u, r) = hover_reference(&d);
    let dyn_: Arc<dyn Dynamics> = d.clone();
    let sol = mpc_step(&dyn_, &x, 0.0, &r, None, &MpcSettings::default(), &costs(&d)).unwrap();
    assert!((&sol.us[0] - &u).amax() < 1e-3, "{} vs {u}", sol.us[0]);
}

#[test]
fn mpc_below_reference_pushes_harder() {
    let d = dynamics(Variant::Full);
    let (_, u, r) = hover_reference(&d);
    let below = d.join(&State::at_rest(&d.robot.model, d.robot.configuration(Vector3::new(0.0, 0.0, 0.5), [0.0, 0.0])));
    let dyn_: Arc<dyn Dynamics> = d.clone();
    let settings = MpcSettings::default();
    let a = mpc_step(&dyn_, &below, 0.0, &r, None, &settings, &costs(&d)).unwrap();
    let collective = |u: &DVector<f64>| MultibodyDynamics::thrusts(u).sum();
    assert!(collective(&a.us[0]) > collective(&u));
    let b = mpc_step(&dyn_, &below, 0.0, &r, None, &settings, &costs(&d)).unwrap();
    assert_eq!(a.us, b.us);
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());
}

#[test]
fn mpc_rejects_non_finite_state() {
    let d = dynamics(Variant::Full);
    let (mut x, _, r) = hover_reference(&d);
    x[2] = f64::NAN;
    let dyn_: Arc<dyn Dynamics> = d.clone();
    let e = mpc_step(&dyn_, &x, 0.0, &r, None, &MpcSettings::default(), &costs(&d)).unwrap_err();
    assert!(matches!(e, ControlError::NonFiniteState));
}

#[test]
fn displacement_plan_reaches_goal_and_returns() {
    let d = dynamics(Variant::Full);
    let start = Vector3::new(0.0, 0.0, 1.0);
    let task = Task::Displacement { start, offset: Vector3::new(1.0, 0.0, 0.0), travel_time: 1.0, hold_time: 0.5 };
    let r = plan(&task, &d, &PlanSettings::default()).unwrap();
    let at = |t: f64| {
        let x = r.state(d.as_ref(), t);
        Vector3::new(x[0], x[1], x[2])
    };
    let goal = start + Vector3::new(1.0, 0.0, 0.0);
    assert!((at(1.4) - goal).amax() < 0.05, "{}", at(1.4));
    assert!((at(3.0) - start).amax() < 0.05, "{}", at(3.0));
}

#[test]
fn zero_displacement_plan_stays_at_hover() {
    let d = dynamics(Variant::Full);
    let start = Vector3::new(0.0, 0.0, 1.0);
    let task = Task::Displacement { start, offset: Vector3::zeros(), travel_time: 0.5, hold_time: 0.2 };
    let r = plan(&task, &d, &PlanSettings::default()).unwrap();
    let x0 = hover_state(&d, start);
    let u0 = equilibrium_control(&d, &x0.rows(0, d.nq()).into_owned());
    for (x, u) in r.states().iter().zip(r.controls()) {
        assert!((x - &x0).amax() < 1e-6);
        assert!((u - &u0).amax() < 1e-6);
    }
}

#[test]
fn hand_hold_reference_keeps_the_hand_still() {
    let config = harness::bundled("ee_hold").unwrap();
    let setup = harness::setup(&config).unwrap();
    let r = setup.reference.unwrap();
    let d = setup.dynamics;
    let s = config.ee_hold.as_ref().unwrap();
    let ee = d.robot.end_effector;
    let window: Vec<Vector3<f64>> = r
        .times()
        .iter()
        .zip(r.states())
        .filter(|(t, _)| **t >= s.approach_time - 1e-9 && **t <= s.approach_time + s.hold + 1e-9)
        .map(|(_, x)| d.frame_pose(x, ee).unwrap().translation)
        .collect();
    assert!(window.len() > 10);
    let spread = window.iter().map(|p| (p - window[0]).norm()).fold(0.0, f64::max);
    assert!(spread <= 0.01, "hand moves {spread} m in the planned hold");
}

#[test]
fn closed_loop_respects_actuator_limits() {
    let mut config = harness::bundled("hover").unwrap();
    config.hover_regulation.as_mut().unwrap().duration = 1.0;
    let out = harness::run(&config).unwrap();
    let limits = ActuatorLimits::default();
    for row in &out.log.rows {
        assert!(row.thrusts.iter().all(|t| *t >= limits.thrust_min && *t <= limits.thrust_max), "{:?}", row.thrusts);
        assert!(row.torques.iter().all(|t| t.abs() <= limits.joint_torque_limit));
    }
}

#[test]
fn runs_are_deterministic() {
    let mut config = harness::bundled("hover").unwrap();
    config.hover_regulation.as_mut().unwrap().duration = 0.5;
    let a = harness::run(&config).unwrap();
    let b = harness::run(&config).unwrap();
    assert_eq!(a.log.rows, b.log.rows);
}

#[test]
fn jump_lifts_off_then_lands() {
    let config = harness::bundled("jump_fly").unwrap();
    let out = harness::run(&config).unwrap();
    assert!(out.log.completed());
    let contact: Vec<bool> = out.log.rows.iter().map(|r| r.contact_force > 0.0).collect();
    assert!(contact[0], "starts on the ground");
    let liftoff = contact.iter().position(|c| !c).expect("leaves the ground");
    let touchdown = liftoff + contact[liftoff..].iter().position(|c| *c).expect("lands");
    assert!(touchdown > liftoff);
    // guided: the base never moves sideways
    assert!(out.log.rows.iter().all(|r| r.q[0] == 0.0 && r.q[1] == 0.0));
}
