//! Dynamics, control allocation, trajectory optimization and closed-loop
//! simulation for a hexarotor carrying a two-joint arm.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod contact;
pub mod control;
pub mod dynamics;
pub mod harness;
pub mod ocp;
pub mod robot;
pub mod spatial;
