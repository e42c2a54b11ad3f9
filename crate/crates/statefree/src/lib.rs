//! A desk-scale imitation-learning laboratory built around a deterministic
//! 2D kinematic simulator.
//!
//! A planar arm picks a block off a table and drops it into a holder. A
//! scripted expert records demonstrations, a small fully-connected policy is
//! behavior-cloned from them, and an evaluation harness measures how the
//! trained policy holds up when the table height or the holder position is
//! moved away from the training distribution.
//!
//! The interesting axes are all configurable:
//!
//! * **action space** — relative/absolute end-effector or joint-angle actions,
//! * **proprioceptive state input** — none, end-effector pose, or joint angles,
//! * **cameras** — an overhead camera plus wrist cameras in normal or
//!   wide-angle variants, single or dual.
//!
//! Everything is seeded and single-threaded, so every dataset, model, and
//! report is bit-reproducible.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each one demonstrates a single capability, from pose algebra up to the
//! full ablation grids. The `statefree` binary wraps the same library calls
//! behind a small CLI.

pub mod action;
pub mod config;
pub mod dataset;
pub mod evalsuite;
pub mod expert;
pub mod kinematics;
pub mod learner;
pub mod rngstream;
pub mod sensing;
pub mod sim;

pub use action::{Action, ActionSpaceKind};
pub use dataset::{Dataset, Episode};
pub use kinematics::{ArmModel, JointConfig, Pose};
pub use sensing::{CameraIntrinsics, CameraMount, Observation, ObservationConfig, StateMode};
pub use sim::{Scene, TaskDistribution, WorldState};
