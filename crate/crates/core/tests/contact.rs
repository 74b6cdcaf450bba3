use borinot_core::actuation::*;
use borinot_core::contact::*;
use borinot_core::dynamics::*;
use borinot_core::robot::{Robot, RobotParams, Variant};
use borinot_core::spatial::{Force, Se3};
use nalgebra::{DVector, Matrix3, Vector3, Vector6};

#[test]
fn vertical_guide_dimensions() {
    let full = Robot::new(RobotParams::default(), Variant::Full).unwrap();
    let guided = Robot::new(RobotParams::default(), Variant::Guided).unwrap();
    assert_eq!(full.model.nv, 6 + 2);
    assert_eq!(guided.model.nv, 1 + 2);
    assert!(!guided.model.has_free_flyer());
    assert!((guided.model.total_mass() - full.model.total_mass()).abs() < 1e-15);
}

#[test]
fn guided_free_fall_is_vertical_gravity() {
    let r = Robot::new(RobotParams::default(), Variant::Guided).unwrap();
    let q = r.configuration(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
    let a = forward_dynamics(&r.model, &q, &DVector::zeros(3), &DVector::zeros(3), None).unwrap();
    assert!((a[0] + 9.80665).abs() < 1e-12);
    assert!(a[1].abs() < 1e-12 && a[2].abs() < 1e-12);
}

#[test]
fn guided_ninety_percent_thrust() {
    let r = Robot::new(RobotParams::default(), Variant::Guided).unwrap();
    let l = RotorLayout::hexagon(&LayoutParams::default());
    let w = wrench_for_gravity_fraction(&r.model, 0.9);
    let alloc = allocate(&w, &l, &ActuatorLimits::default());
    let (tau, fext) = r.actuation_forces(&l, &alloc.thrusts, &[0.0, 0.0]);
    let q = r.configuration(Vector3::new(0.0, 0.0, 1.0), [0.0, 0.0]);
    let a = forward_dynamics(&r.model, &q, &DVector::zeros(3), &tau, Some(&fext)).unwrap();
    // (0.9 − 1)·g
    assert!((a[0] + 0.980665).abs() < 1e-6, "{}", a[0]);
}

#[test]
fn point_mass_drop_settles_at_static_penetration() {
    let mass = 2.0;
    let spec = ModelSpec {
        bodies: vec![BodySpec { name: "p".into(), mass, inertia: Matrix3::identity() * 1e-3, com: Vector3::zeros() }],
        joints: vec![JointSpec {
            name: "slide".into(),
            parent: None,
            child: "p".into(),
            kind: JointType::Prismatic { axis: Vector3::z() },
            placement: Se3::identity(),
        }],
        gravity: Vector3::new(0.0, 0.0, -9.80665),
        frames: vec![FrameSpec { name: "foot".into(), body: "p".into(), placement: Se3::identity() }],
    };
    let model = build_model(&spec).unwrap();
    let params = ContactParams::default();
    let foot = model.frame_id("foot").unwrap();
    let mut s = State::new(DVector::from_vec(vec![0.2]), DVector::zeros(1));
    let dt = 1e-3;
    let mut settled_at = None;
    for k in 0..3000 {
        let pose = frame_pose(&model, &s.q, foot);
        let (vel, _) = frame_velocity(&model, &s.q, &s.v, foot);
        let f = contact_force(&pose.translation, &vel, &params);
        let fext: Vec<Force> = vec![point_force_wrench(&pose, &pose.translation, &f)];
        s = symplectic_step(&model, &s, &DVector::zeros(1), Some(&fext), dt).unwrap();
        if s.v[0].abs() > 1e-3 {
            settled_at = None;
        } else if settled_at.is_none() {
            settled_at = Some(k);
        }
    }
    let t_settle = settled_at.expect("never settled") as f64 * dt;
    // the ground is reached after √(2·0.2/g) ≈ 0.2 s
    assert!(t_settle <= 0.2 + 2.0, "settled at {t_settle}");
    let expected = mass * 9.80665 / params.stiffness;
    assert!(((-s.q[0]) - expected).abs() <= 0.01 * expected, "{} vs {expected}", -s.q[0]);
}

#[test]
fn thrust_wrench_on_base_body() {
    let r = Robot::new(RobotParams::default(), Variant::Full).unwrap();
    let l = RotorLayout::hexagon(&LayoutParams::default());
    let t = Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
    let (tau, fext) = r.actuation_forces(&l, &t, &[0.3, -0.2]);
    let w = thrusts_to_wrench(&t, &l);
    assert_eq!(fext[0][2], w.collective);
    assert!((fext[0][3] - w.torque.x).abs() < 1e-15);
    assert!((fext[0][5] - w.torque.z).abs() < 1e-15);
    assert_eq!(tau[6], 0.3);
    assert_eq!(tau[7], -0.2);
    assert!(fext[1].norm() == 0.0 && fext[2].norm() == 0.0);
}
