use borinot_core::dynamics::*;
use borinot_core::robot::{Robot, RobotParams, Variant, ARM_JOINTS};
use borinot_core::spatial::{Force, Se3};
use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn robot() -> Robot {
    Robot::new(RobotParams::default(), Variant::Full).unwrap()
}

fn random_q(model: &Model, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut q = model.neutral();
    for i in 0..3 {
        q[i] = rng.gen_range(-10.0..10.0);
    }
    let quat = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ));
    set_base_orientation(model, &mut q, &quat);
    for i in 7..model.nq {
        q[i] = rng.gen_range(-10.0..10.0);
    }
    q
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-10.0..10.0))
}

/// The two arm links on a fixed shoulder, hanging down at zero angles.
fn fixed_base_arm(params: &RobotParams) -> Model {
    let mut spec = params.model_spec();
    spec.bodies.retain(|b| b.name != "base");
    spec.joints.retain(|j| j.parent.is_some());
    spec.frames.retain(|f| f.body != "base");
    let shoulder = spec.joints.iter_mut().find(|j| j.name == ARM_JOINTS[0]).unwrap();
    shoulder.parent = None;
    shoulder.placement = Se3::identity();
    build_model(&spec).unwrap()
}

/// Planar two-link forward kinematics for joints about +y, arm hanging along −z.
fn two_link_oracle(l1: f64, l2: f64, t1: f64, t2: f64) -> (f64, f64) {
    let x = -(l1 * t1.sin() + l2 * (t1 + t2).sin());
    let z = -(l1 * t1.cos() + l2 * (t1 + t2).cos());
    (x, z)
}

#[test]
fn platform_has_eight_velocity_dofs() {
    let r = robot();
    assert_eq!(r.model.nv, 8);
    assert_eq!(r.model.nq, 9);
}

#[test]
fn total_mass_matches_thrust_to_weight() {
    let r = robot();
    let (_, m) = com(&r.model, &r.model.neutral());
    // 120 N / (5.2 · 9.80665 m/s²), quoted as 2.354 kg after rounding.
    assert!((m - 2.353191260718296).abs() < 1e-12);
    assert!((m - 2.354).abs() < 1e-3);
}

#[test]
fn lone_body_com_is_base_position() {
    let spec = ModelSpec {
        bodies: vec![BodySpec {
            name: "b".into(),
            mass: 2.0,
            inertia: Matrix3::identity() * 0.1,
            com: Vector3::zeros(),
        }],
        joints: vec![JointSpec {
            name: "root".into(),
            parent: None,
            child: "b".into(),
            kind: JointType::FreeFlyer,
            placement: Se3::identity(),
        }],
        gravity: Vector3::new(0.0, 0.0, -9.81),
        frames: vec![],
    };
    let model = build_model(&spec).unwrap();
    assert_eq!(model.nv, 6);
    let mut q = model.neutral();
    q[0] = 0.3;
    q[1] = -1.2;
    q[2] = 4.0;
    let (c, m) = com(&model, &q);
    assert_eq!(m, 2.0);
    assert!((c - Vector3::new(0.3, -1.2, 4.0)).norm() < 1e-15);

    let mass = mass_matrix(&model, &q);
    assert!((mass.fixed_view::<3, 3>(0, 0) - Matrix3::identity() * 2.0).norm() < 1e-15);

    let a = forward_dynamics(&model, &q, &DVector::zeros(6), &DVector::zeros(6), None).unwrap();
    assert!((a.rows(0, 3) - Vector3::new(0.0, 0.0, -9.81)).norm() < 1e-12);
    assert!(a.rows(3, 3).norm() < 1e-12);
}

#[test]
fn two_point_masses_com_at_midpoint() {
    let point = |name: &str| BodySpec {
        name: name.into(),
        mass: 1.5,
        inertia: Matrix3::identity() * 1e-4,
        com: Vector3::zeros(),
    };
    let spec = ModelSpec {
        bodies: vec![point("a"), point("b")],
        joints: vec![
            JointSpec {
                name: "root".into(),
                parent: None,
                child: "a".into(),
                kind: JointType::FreeFlyer,
                placement: Se3::from_translation(Vector3::new(-0.4, 0.0, 0.0)),
            },
            JointSpec {
                name: "j".into(),
                parent: Some("a".into()),
                child: "b".into(),
                kind: JointType::Prismatic { axis: Vector3::x() },
                placement: Se3::from_translation(Vector3::new(0.8, 0.0, 0.0)),
            },
        ],
        gravity: Vector3::zeros(),
        frames: vec![],
    };
    let model = build_model(&spec).unwrap();
    let (c, m) = com(&model, &model.neutral());
    assert_eq!(m, 3.0);
    assert!(c.norm() < 1e-15);
}

#[test]
fn forward_kinematics_rest_placements() {
    let r = robot();
    let p = &r.params;
    let fk = forward_kinematics(&r.model, &r.model.neutral());
    let ee = fk.frames[r.end_effector].translation;
    let expected = Vector3::new(0.0, 0.0, p.shoulder_position[2] - p.link_lengths[0] - p.link_lengths[1]);
    assert!((ee - expected).norm() < 1e-15);
    assert_eq!(fk.frames[r.base_frame()], Se3::identity());
}

#[test]
fn end_effector_matches_two_link_formula() {
    let r = robot();
    let p = &r.params;
    let [l1, l2] = p.link_lengths;
    let (t1, t2) = (0.3, -0.7);
    let q = r.configuration(Vector3::zeros(), [t1, t2]);
    let ee = frame_pose(&r.model, &q, r.end_effector).translation;
    let (x, z) = two_link_oracle(l1, l2, t1, t2);
    let sh = Vector3::from(p.shoulder_position);
    assert!((ee - (sh + Vector3::new(x, 0.0, z))).norm() < 1e-14);
    // frozen from the oracle above with the default geometry
    assert!((ee.x - 0.015023701703569751).abs() < 1e-14);
    assert!((ee.z + 0.34022359730055857).abs() < 1e-14);
    assert!(ee.y.abs() < 1e-15);
}

#[test]
fn fixed_base_arm_mass_matrix_matches_lagrangian() {
    let params = RobotParams::default();
    let model = fixed_base_arm(&params);
    assert_eq!(model.nv, 2);
    let q = DVector::from_vec(vec![1.1, 0.4]);
    let m = mass_matrix(&model, &q);
    // closed-form double-pendulum inertia for uniform rods (values frozen)
    assert!((m[(0, 0)] - 0.010800207550304412).abs() < 1e-15);
    assert!((m[(0, 1)] - 0.0030521871084855396).abs() < 1e-15);
    assert!((m[(1, 0)] - 0.0030521871084855396).abs() < 1e-15);
    assert!((m[(1, 1)] - 0.0012837500000000002).abs() < 1e-15);
}

#[test]
fn hover_support_force_is_weight() {
    let r = robot();
    let q = r.model.neutral();
    let zero = DVector::zeros(8);
    let tau = inverse_dynamics(&r.model, &q, &zero, &zero, None);
    // m·g = 120 / 5.2
    assert!((tau[2] - 23.076923076923077).abs() < 1e-9);
    assert!(tau.rows(0, 2).norm() < 1e-12);
    let a = forward_dynamics(&r.model, &q, &zero, &tau, None).unwrap();
    assert!(a.norm() <= 1e-8);
}

#[test]
fn zero_gravity_at_rest_needs_no_force() {
    let params = RobotParams { gravity: 0.0, ..Default::default() };
    let r = Robot::new(params, Variant::Full).unwrap();
    let q = r.configuration(Vector3::new(1.0, 2.0, 3.0), [0.5, -0.2]);
    let zero = DVector::zeros(8);
    assert!(inverse_dynamics(&r.model, &q, &zero, &zero, None).norm() < 1e-15);
}

#[test]
fn mass_matrix_symmetric_spd_on_random_configurations() {
    let r = robot();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let q = random_q(&r.model, &mut rng);
        let m = mass_matrix(&r.model, &q);
        assert!((&m - m.transpose()).amax() <= 1e-10);
        let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
        assert!(min_eig > 0.0);
    }
}

#[test]
fn mass_matrix_columns_match_rnea_differences() {
    let r = robot();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let zero = DVector::zeros(8);
    for _ in 0..50 {
        let q = random_q(&r.model, &mut rng);
        let m = mass_matrix(&r.model, &q);
        let base = inverse_dynamics(&r.model, &q, &zero, &zero, None);
        for k in 0..8 {
            let mut a = DVector::zeros(8);
            a[k] = 1.0;
            let col = inverse_dynamics(&r.model, &q, &zero, &a, None) - &base;
            assert!((col - m.column(k)).amax() < 1e-12);
        }
    }
}

#[test]
fn rnea_aba_roundtrip_on_random_states() {
    let r = robot();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let q = random_q(&r.model, &mut rng);
        let v = random_vec(8, &mut rng);
        let tau = random_vec(8, &mut rng);
        let a = forward_dynamics(&r.model, &q, &v, &tau, None).unwrap();
        let back = inverse_dynamics(&r.model, &q, &v, &a, None);
        assert!((back - &tau).amax() <= 1e-8);
    }
}

#[test]
fn aba_matches_dense_solve_with_external_forces() {
    let r = robot();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let zero = DVector::zeros(8);
    for _ in 0..100 {
        let q = random_q(&r.model, &mut rng);
        let v = random_vec(8, &mut rng);
        let tau = random_vec(8, &mut rng);
        let fext: Vec<Force> =
            (0..r.model.bodies.len()).map(|_| Force::from_fn(|_, _| rng.gen_range(-10.0..10.0))).collect();
        let a = forward_dynamics(&r.model, &q, &v, &tau, Some(&fext)).unwrap();
        let m: DMatrix<f64> = mass_matrix(&r.model, &q);
        // τ − b + Jᵀf, with the last two terms taken from RNEA at zero acceleration
        let rhs = &tau - inverse_dynamics(&r.model, &q, &v, &zero, Some(&fext));
        let dense = m.cholesky().unwrap().solve(&rhs);
        assert!((&a - &dense).amax() <= 1e-8 * (1.0 + dense.amax()));
    }
}

#[test]
fn integrate_at_rest_is_identity() {
    let r = robot();
    let q = r.configuration(Vector3::new(0.1, 0.2, 0.3), [0.4, 0.5]);
    let s = State::at_rest(&r.model, q.clone());
    let next = integrate(&r.model, &s, &DVector::zeros(8), 1e-3);
    assert_eq!(next.q, q);
    assert_eq!(next.v, s.v);
}

#[test]
fn constant_spin_rotates_by_pi() {
    let r = robot();
    let dt = 1e-4;
    let steps = 10_000;
    let omega = std::f64::consts::PI / (steps as f64 * dt);
    let mut v = DVector::zeros(8);
    v[5] = omega;
    let mut s = State::new(r.model.neutral(), v);
    for _ in 0..steps {
        s = integrate(&r.model, &s, &DVector::zeros(8), dt);
    }
    let rot = base_orientation(&r.model, &s.q);
    let expected = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI);
    assert!(rot.angle_to(&expected) < 1e-6);
}

#[test]
fn free_fall_drop_in_one_second() {
    let r = robot();
    let mut s = State::at_rest(&r.model, r.model.neutral());
    let tau = DVector::zeros(8);
    for _ in 0..1000 {
        let a = forward_dynamics(&r.model, &s.q, &s.v, &tau, None).unwrap();
        s = integrate(&r.model, &s, &a, 1e-3);
    }
    // ½·g·t² = 4.903325 m
    let dz = s.q[2];
    assert!((dz + 4.903325).abs() <= 0.005 * 4.903325, "dz = {dz}");
}

/// Largest relative deviation of the passive arm's mechanical energy, released
/// from horizontal, measured against hanging at rest.
fn arm_energy_drift(dt: f64, duration: f64) -> f64 {
    let params = RobotParams::default();
    let model = fixed_base_arm(&params);
    let energy = |s: &State| kinetic_energy(&model, &s.q, &s.v) + potential_energy(&model, &s.q);
    let floor = energy(&State::at_rest(&model, DVector::zeros(2)));
    let mut s = State::at_rest(&model, DVector::from_vec(vec![std::f64::consts::FRAC_PI_2, 0.0]));
    let e0 = energy(&s) - floor;
    let tau = DVector::zeros(2);
    let steps = (duration / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        s = symplectic_step(&model, &s, &tau, None, dt).unwrap();
        worst = worst.max((energy(&s) - floor - e0).abs());
    }
    worst / e0
}

#[test]
fn passive_arm_conserves_energy() {
    let drift = arm_energy_drift(1e-4, 2.0);
    assert!(drift <= 1e-3, "relative drift {drift}");
}

proptest! {
    #[test]
    fn base_translation_shifts_every_frame(
        x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0,
        t1 in -3.0f64..3.0, t2 in -3.0f64..3.0,
    ) {
        let r = robot();
        let q0 = r.configuration(Vector3::zeros(), [t1, t2]);
        let q1 = r.configuration(Vector3::new(x, y, z), [t1, t2]);
        let a = forward_kinematics(&r.model, &q0);
        let b = forward_kinematics(&r.model, &q1);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            prop_assert!((fb.translation - fa.translation - Vector3::new(x, y, z)).norm() < 1e-12);
            prop_assert!((fb.rotation - fa.rotation).norm() < 1e-15);
        }
    }

    #[test]
    fn rigid_base_motion_transforms_every_frame(
        x in -5.0f64..5.0, ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0, angle in -3.0f64..3.0,
        t1 in -3.0f64..3.0, t2 in -3.0f64..3.0,
    ) {
        let r = robot();
        let axis = Vector3::new(ax, ay, az + 1.5).normalize();
        let rot = UnitQuaternion::from_scaled_axis(axis * angle);
        let g = Se3::new(rot.to_rotation_matrix().into_inner(), Vector3::new(x, -x, 0.5 * x));
        let q0 = r.configuration(Vector3::zeros(), [t1, t2]);
        let mut q1 = r.configuration(g.translation, [t1, t2]);
        set_base_orientation(&r.model, &mut q1, &rot);
        let a = forward_kinematics(&r.model, &q0);
        let b = forward_kinematics(&r.model, &q1);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            let moved = g.compose(fa);
            prop_assert!((fb.translation - moved.translation).norm() < 1e-12);
            prop_assert!((fb.rotation - moved.rotation).norm() < 1e-12);
        }
    }

    #[test]
    fn quaternion_stays_unit_after_integration(
        w in proptest::array::uniform3(-20.0f64..20.0),
        lin in proptest::array::uniform3(-20.0f64..20.0),
        dt in 1e-4f64..0.05,
    ) {
        let r = robot();
        let mut v = DVector::zeros(8);
        v.rows_mut(0, 3).copy_from(&Vector3::from(lin));
        v.rows_mut(3, 3).copy_from(&Vector3::from(w));
        let mut s = State::new(r.model.neutral(), v);
        for _ in 0..20 {
            s = integrate(&r.model, &s, &DVector::zeros(8), dt);
            let n = quaternion_norm(&r.model, &s.q).unwrap();
            prop_assert!((n - 1.0).abs() <= 1e-9);
        }
    }
}
