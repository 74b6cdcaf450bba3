//! Kinematics and dynamics of a floating-base kinematic tree.

mod algorithms;
mod kinematics;
mod model;
mod state;
mod variational;

pub use algorithms::{bias_forces, forward_dynamics, inverse_dynamics, mass_matrix, DynamicsError};
pub use kinematics::{
    body_velocities, com, forward_kinematics, frame_pose, frame_velocity, kinetic_energy, potential_energy, Placements,
};
pub use model::{
    build_model, Body, BodySpec, Frame, FrameSpec, Joint, JointSpec, JointType, Model, ModelError, ModelSpec,
};
pub use state::{
    base_orientation, difference_configuration, integrate, integrate_configuration, quaternion_norm,
    set_base_orientation, State,
};
pub use variational::symplectic_step;

/// Generalized force: base wrench (body frame) followed by joint torques.
pub type GeneralizedForce = nalgebra::DVector<f64>;
