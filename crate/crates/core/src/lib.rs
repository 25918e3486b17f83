//! Minimum-time reorientation of an axisymmetric rigid spacecraft.
//!
//! The pipeline solves the problem directly by multi-domain Radau
//! collocation, detects the bang/singular control structure, re-solves with
//! the switch times as decision variables, regularizes singular arcs, and
//! checks the result against the minimum principle and an indirect shooting
//! solution.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod collocation;
pub mod dynamics;
pub mod error;
pub mod mesh;
pub mod nlp;
pub mod oracle;
pub mod pmp;
pub mod structure;
pub mod trajectory;

pub use dynamics::{builtin_maneuver, Control, Maneuver, SpacecraftModel, State, Terminal, TorqueMode};
pub use error::{Error, Result};
pub use trajectory::{Trajectory, TrajectoryPoint, TrajectorySource};
