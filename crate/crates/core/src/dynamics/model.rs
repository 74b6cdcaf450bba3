use nalgebra::{DVector, Matrix3, SymmetricEigen, UnitQuaternion, Vector3};

use crate::spatial::{exp3, Inertia, Motion, Se3};

/// Tolerance on joint axis norms.
const AXIS_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BodySpec {
    pub name: String,
    pub mass: f64,
    /// Rotational inertia about the centre of mass, body axes.
    pub inertia: Matrix3<f64>,
    /// Centre of mass in the body frame.
    pub com: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JointType {
    /// 6-DoF joint to the world. Configuration `[x y z qx qy qz qw]`, velocity
    /// `[v ω]` with both components in the body frame.
    FreeFlyer,
    Revolute {
        axis: Vector3<f64>,
    },
    Prismatic {
        axis: Vector3<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    /// `None` attaches the joint to the world.
    pub parent: Option<String>,
    pub child: String,
    pub kind: JointType,
    /// Joint frame in the parent body frame (world frame for root joints).
    pub placement: Se3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub name: String,
    pub body: String,
    pub placement: Se3,
}

/// Description of a floating-base kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub bodies: Vec<BodySpec>,
    pub joints: Vec<JointSpec>,
    pub gravity: Vector3<f64>,
    pub frames: Vec<FrameSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("cycle in joint graph at joint `{0}`")]
    Cycle(String),
    #[error("joint graph is not a rooted tree: {0}")]
    NotATree(String),
    #[error("body `{0}` has non-positive mass")]
    NonPositiveMass(String),
    #[error("body `{0}` inertia is not symmetric positive definite")]
    NonSpdInertia(String),
    #[error("body `{0}` inertia violates the triangle inequality")]
    TriangleInequality(String),
    #[error("`{owner}` references unknown body `{body}`")]
    UnknownBody { owner: String, body: String },
    #[error("joint `{0}` axis is not a unit vector")]
    BadAxis(String),
    #[error("free-flyer joint `{0}` is only allowed at the root")]
    FreeFlyerNotRoot(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub kind: JointType,
    pub placement: Se3,
    pub idx_q: usize,
    pub idx_v: usize,
}

impl Joint {
    pub fn nq(&self) -> usize {
        match self.kind {
            JointType::FreeFlyer => 7,
            _ => 1,
        }
    }

    pub fn nv(&self) -> usize {
        match self.kind {
            JointType::FreeFlyer => 6,
            _ => 1,
        }
    }

    /// Child frame relative to the joint frame.
    pub fn transform(&self, q: &DVector<f64>) -> Se3 {
        let i = self.idx_q;
        match self.kind {
            JointType::FreeFlyer => {
                let quat = quaternion_at(q, i + 3);
                Se3::new(quat.to_rotation_matrix().into_inner(), Vector3::new(q[i], q[i + 1], q[i + 2]))
            }
            JointType::Revolute { axis } => Se3::from_rotation(exp3(&(axis * q[i]))),
            JointType::Prismatic { axis } => Se3::from_translation(axis * q[i]),
        }
    }

    /// `S·q̇` for this joint, in the child frame.
    #[inline]
    pub fn motion(&self, qd: &DVector<f64>) -> Motion {
        let i = self.idx_v;
        match self.kind {
            JointType::FreeFlyer => Motion::from_iterator(qd.rows(i, 6).iter().copied()),
            JointType::Revolute { axis } => Motion::new(0.0, 0.0, 0.0, axis.x, axis.y, axis.z) * qd[i],
            JointType::Prismatic { axis } => Motion::new(axis.x, axis.y, axis.z, 0.0, 0.0, 0.0) * qd[i],
        }
    }

    /// Motion subspace column of a 1-DoF joint.
    #[inline]
    pub fn axis_motion(&self) -> Option<Motion> {
        match self.kind {
            JointType::FreeFlyer => None,
            JointType::Revolute { axis } => Some(Motion::new(0.0, 0.0, 0.0, axis.x, axis.y, axis.z)),
            JointType::Prismatic { axis } => Some(Motion::new(axis.x, axis.y, axis.z, 0.0, 0.0, 0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    pub parent: Option<usize>,
    pub joint_name: String,
    pub joint: Joint,
    pub inertia: Inertia,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub name: String,
    pub body: usize,
    pub placement: Se3,
}

/// Validated kinematic tree. Bodies are stored in topological order, so every
/// parent index is smaller than its child's.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub bodies: Vec<Body>,
    pub frames: Vec<Frame>,
    pub gravity: Vector3<f64>,
    pub nq: usize,
    pub nv: usize,
}

pub(crate) fn quaternion_at(q: &DVector<f64>, i: usize) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(nalgebra::Quaternion::new(q[i + 3], q[i], q[i + 1], q[i + 2]))
}

fn check_inertia(name: &str, mass: f64, inertia: &Matrix3<f64>) -> Result<(), ModelError> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(ModelError::NonPositiveMass(name.to_string()));
    }
    let asym = (inertia - inertia.transpose()).abs().max();
    if asym > 1e-12 * inertia.abs().max().max(1.0) {
        return Err(ModelError::NonSpdInertia(name.to_string()));
    }
    let eig = SymmetricEigen::new(*inertia).eigenvalues;
    if eig.iter().any(|&e| !(e > 0.0)) {
        return Err(ModelError::NonSpdInertia(name.to_string()));
    }
    let (a, b, c) = (eig[0], eig[1], eig[2]);
    let slack = 1e-12 * (a + b + c);
    if a + b < c - slack || a + c < b - slack || b + c < a - slack {
        return Err(ModelError::TriangleInequality(name.to_string()));
    }
    Ok(())
}

fn check_axis(joint: &str, axis: &Vector3<f64>) -> Result<(), ModelError> {
    if (axis.norm() - 1.0).abs() > AXIS_NORM_TOL {
        return Err(ModelError::BadAxis(joint.to_string()));
    }
    Ok(())
}

/// Validates a [`ModelSpec`] and fixes the topology ordering and index layout.
pub fn build_model(spec: &ModelSpec) -> Result<Model, ModelError> {
    for (i, b) in spec.bodies.iter().enumerate() {
        if spec.bodies[..i].iter().any(|o| o.name == b.name) {
            return Err(ModelError::Duplicate(b.name.clone()));
        }
        check_inertia(&b.name, b.mass, &b.inertia)?;
    }
    let body_index = |owner: &str, name: &str| {
        spec.bodies
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| ModelError::UnknownBody { owner: owner.to_string(), body: name.to_string() })
    };

    // child body -> joint spec index
    let mut joint_of = vec![None; spec.bodies.len()];
    for (ji, j) in spec.joints.iter().enumerate() {
        if j.parent.as_deref() == Some(j.child.as_str()) {
            return Err(ModelError::Cycle(j.name.clone()));
        }
        let child = body_index(&j.name, &j.child)?;
        if let Some(p) = &j.parent {
            body_index(&j.name, p)?;
        }
        match j.kind {
            JointType::Revolute { axis } | JointType::Prismatic { axis } => check_axis(&j.name, &axis)?,
            JointType::FreeFlyer if j.parent.is_some() => return Err(ModelError::FreeFlyerNotRoot(j.name.clone())),
            JointType::FreeFlyer => {}
        }
        if joint_of[child].replace(ji).is_some() {
            return Err(ModelError::NotATree(format!("body `{}` has two parent joints", j.child)));
        }
    }
    if let Some(b) = joint_of.iter().position(Option::is_none) {
        return Err(ModelError::NotATree(format!("body `{}` is not attached", spec.bodies[b].name)));
    }
    let roots = spec.joints.iter().filter(|j| j.parent.is_none()).count();
    if roots != 1 {
        return Err(ModelError::NotATree(format!("expected one root joint, found {roots}")));
    }

    // Breadth-first ordering from the root; anything unreached sits on a cycle.
    let mut order: Vec<usize> = Vec::with_capacity(spec.bodies.len());
    let mut frontier: Vec<Option<&str>> = vec![None];
    while let Some(parent) = frontier.pop() {
        for (ji, j) in spec.joints.iter().enumerate() {
            if j.parent.as_deref() == parent {
                let child = body_index(&j.name, &j.child)?;
                debug_assert_eq!(joint_of[child], Some(ji));
                order.push(child);
                frontier.insert(0, Some(spec.bodies[child].name.as_str()));
            }
        }
    }
    if order.len() != spec.bodies.len() {
        let stuck = (0..spec.bodies.len()).find(|b| !order.contains(b)).unwrap();
        let ji = joint_of[stuck].unwrap();
        return Err(ModelError::Cycle(spec.joints[ji].name.clone()));
    }

    let mut bodies: Vec<Body> = Vec::with_capacity(order.len());
    let (mut nq, mut nv) = (0, 0);
    for &bi in &order {
        let bs = &spec.bodies[bi];
        let js = &spec.joints[joint_of[bi].unwrap()];
        let parent =
            js.parent.as_ref().map(|p| bodies.iter().position(|b| &b.name == p).expect("parent ordered first"));
        let joint = Joint { kind: js.kind, placement: js.placement, idx_q: nq, idx_v: nv };
        nq += joint.nq();
        nv += joint.nv();
        bodies.push(Body {
            name: bs.name.clone(),
            parent,
            joint_name: js.name.clone(),
            joint,
            inertia: Inertia::new(bs.mass, bs.com, bs.inertia),
        });
    }

    let mut frames = Vec::with_capacity(spec.frames.len());
    for f in &spec.frames {
        if frames.iter().any(|o: &Frame| o.name == f.name) {
            return Err(ModelError::Duplicate(f.name.clone()));
        }
        let body = bodies
            .iter()
            .position(|b| b.name == f.body)
            .ok_or_else(|| ModelError::UnknownBody { owner: f.name.clone(), body: f.body.clone() })?;
        frames.push(Frame { name: f.name.clone(), body, placement: f.placement });
    }

    Ok(Model { bodies, frames, gravity: spec.gravity, nq, nv })
}

impl Model {
    /// Number of articulated (non-root) degrees of freedom.
    pub fn n_joints(&self) -> usize {
        self.nv - self.bodies[0].joint.nv()
    }

    pub fn has_free_flyer(&self) -> bool {
        matches!(self.bodies[0].joint.kind, JointType::FreeFlyer)
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.inertia.mass).sum()
    }

    pub fn frame_id(&self, name: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.name == name)
    }

    pub fn body_id(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint_v_index(&self, joint_name: &str) -> Option<usize> {
        self.bodies.iter().find(|b| b.joint_name == joint_name).map(|b| b.joint.idx_v)
    }

    /// Zero joint values and identity base orientation.
    pub fn neutral(&self) -> DVector<f64> {
        let mut q = DVector::zeros(self.nq);
        for b in &self.bodies {
            if matches!(b.joint.kind, JointType::FreeFlyer) {
                q[b.joint.idx_q + 6] = 1.0;
            }
        }
        q
    }

    pub fn check_q(&self, q: &DVector<f64>) {
        assert_eq!(q.len(), self.nq, "configuration dimension");
    }

    pub fn check_v(&self, v: &DVector<f64>) {
        assert_eq!(v.len(), self.nv, "velocity dimension");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(name: &str) -> BodySpec {
        BodySpec {
            name: name.into(),
            mass: 1.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, 0.1)),
            com: Vector3::zeros(),
        }
    }

    fn joint(name: &str, parent: Option<&str>, child: &str, kind: JointType) -> JointSpec {
        JointSpec {
            name: name.into(),
            parent: parent.map(Into::into),
            child: child.into(),
            kind,
            placement: Se3::identity(),
        }
    }

    fn spec(bodies: Vec<BodySpec>, joints: Vec<JointSpec>) -> ModelSpec {
        ModelSpec { bodies, joints, gravity: Vector3::new(0.0, 0.0, -9.81), frames: vec![] }
    }

    #[test]
    fn single_free_flyer() {
        let m =
            build_model(&spec(vec![body("base")], vec![joint("root", None, "base", JointType::FreeFlyer)])).unwrap();
        assert_eq!(m.nv, 6);
        assert_eq!(m.nq, 7);
        assert_eq!(m.n_joints(), 0);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = build_model(&spec(
            vec![body("base"), body("link")],
            vec![
                joint("root", None, "base", JointType::FreeFlyer),
                joint("j", Some("link"), "link", JointType::Revolute { axis: Vector3::y() }),
            ],
        ))
        .unwrap_err();
        assert_eq!(err, ModelError::Cycle("j".into()));
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn two_body_loop_is_a_cycle() {
        let err = build_model(&spec(
            vec![body("base"), body("a"), body("b")],
            vec![
                joint("root", None, "base", JointType::FreeFlyer),
                joint("ja", Some("b"), "a", JointType::Revolute { axis: Vector3::y() }),
                joint("jb", Some("a"), "b", JointType::Revolute { axis: Vector3::y() }),
            ],
        ))
        .unwrap_err();
        assert!(matches!(err, ModelError::Cycle(_)));
    }

    #[test]
    fn rejects_bad_inertia() {
        let mut b = body("base");
        b.inertia = Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, -0.1));
        let err = build_model(&spec(vec![b], vec![joint("root", None, "base", JointType::FreeFlyer)])).unwrap_err();
        assert_eq!(err, ModelError::NonSpdInertia("base".into()));

        let mut b = body("base");
        b.inertia = Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, 0.5));
        let err = build_model(&spec(vec![b], vec![joint("root", None, "base", JointType::FreeFlyer)])).unwrap_err();
        assert_eq!(err, ModelError::TriangleInequality("base".into()));

        let mut b = body("base");
        b.mass = 0.0;
        assert!(matches!(
            build_model(&spec(vec![b], vec![joint("root", None, "base", JointType::FreeFlyer)])),
            Err(ModelError::NonPositiveMass(_))
        ));
    }

    #[test]
    fn rejects_unknown_frame_body() {
        let mut s = spec(vec![body("base")], vec![joint("root", None, "base", JointType::FreeFlyer)]);
        s.frames.push(FrameSpec { name: "tip".into(), body: "nope".into(), placement: Se3::identity() });
        let err = build_model(&s).unwrap_err();
        assert_eq!(err, ModelError::UnknownBody { owner: "tip".into(), body: "nope".into() });
    }

    #[test]
    fn rejects_non_unit_axis() {
        let err = build_model(&spec(
            vec![body("base"), body("link")],
            vec![
                joint("root", None, "base", JointType::FreeFlyer),
                joint("j", Some("base"), "link", JointType::Revolute { axis: Vector3::new(0.0, 1.0, 1e-3) }),
            ],
        ))
        .unwrap_err();
        assert_eq!(err, ModelError::BadAxis("j".into()));
    }

    #[test]
    fn topological_order_regardless_of_listing() {
        let m = build_model(&spec(
            vec![body("l2"), body("l1"), body("base")],
            vec![
                joint("j2", Some("l1"), "l2", JointType::Revolute { axis: Vector3::y() }),
                joint("j1", Some("base"), "l1", JointType::Revolute { axis: Vector3::y() }),
                joint("root", None, "base", JointType::FreeFlyer),
            ],
        ))
        .unwrap();
        let names: Vec<_> = m.bodies.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["base", "l1", "l2"]);
        assert_eq!(m.bodies[2].parent, Some(1));
        assert_eq!(m.nv, 8);
    }
}
