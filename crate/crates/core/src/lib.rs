//! Core of the stage server: rig math, capture ingest, two-stage
//! retargeting, per-region blending, stage-space geometry and pathfinding.
//!
//! Every operation here is a pure function over immutable values (the frame
//! mailbox being the one synchronized exception), so the tick loop can call
//! into it without locks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capture;
pub mod math;
pub mod pathfind;
pub mod puppeteer;
pub mod retarget;
pub mod skeleton;
pub mod stagespace;

pub use math::{Quat, Vec2, Vec3};
pub use skeleton::{forward_kinematics, neutral_skeleton, validate_skeleton, Joint, Pose, Skeleton, Transform};
