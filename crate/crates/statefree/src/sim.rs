//! The pick-and-place world: table, block, holder, and an arm hanging over
//! them from a fixed mount.
//!
//! Stepping is purely kinematic. A gripper closing within [`GRASP_TOL`] of
//! the block center attaches the block to the end-effector; opening releases
//! it, and the block settles straight down onto the highest support under
//! its footprint (table, holder floor, or a holder wall top). There are no
//! dynamics: the mechanism under study is perceptual, not physical.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{apply_action, Action, ActionError};
use crate::kinematics::{forward_kinematics, ik_solve, ArmModel, JointConfig, Pose};
use std::f64::consts::FRAC_PI_2;

/// Horizontal extent of the table surface.
pub const TABLE_X0: f64 = 0.05;
pub const TABLE_X1: f64 = 1.15;
/// Holder wall thickness.
pub const WALL_THICKNESS: f64 = 0.012;
/// Gripper catch radius around the block center.
pub const GRASP_TOL: f64 = 0.02;
/// Step budget per episode before a trial counts as failed.
pub const MAX_EPISODE_STEPS: u32 = 120;
/// End-effector home position relative to the arm base.
pub const HOME_OFFSET: (f64, f64) = (0.0, -0.34);
/// Gripper orientation used throughout: pointing straight down.
pub const GRIP_DOWN: f64 = -FRAC_PI_2;

/// Default training-time geometry.
pub const DEFAULT_TABLE_Z: f64 = 0.80;
pub const DEFAULT_BLOCK_W: f64 = 0.03;
pub const DEFAULT_BLOCK_H: f64 = 0.04;
pub const DEFAULT_HOLDER_X: f64 = 0.60;
pub const DEFAULT_HOLDER_W: f64 = 0.07;
pub const DEFAULT_WALL_H: f64 = 0.05;
pub const DEFAULT_BLOCK_RANGE: [f64; 2] = [0.35, 0.50];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("home pose unreachable: {0}")]
    HomeUnreachable(crate::kinematics::KinematicsError),
    #[error(transparent)]
    Action(#[from] ActionError),
}

/// The default arm. Mounted above the workspace so the gripper can point
/// straight down everywhere the task needs it.
pub fn arm_a() -> ArmModel {
    ArmModel::new(0.50, 1.44, vec![0.30, 0.25, 0.20], vec![[-2.9, 2.9]; 3])
}

/// A second embodiment: longer links, base shifted by (+0.05, +0.03).
pub fn arm_b() -> ArmModel {
    ArmModel::new(0.55, 1.47, vec![0.35, 0.28, 0.22], vec![[-2.9, 2.9]; 3])
}

/// One concrete task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub table_z: f64,
    pub block_x: f64,
    pub block_w: f64,
    pub block_h: f64,
    pub holder_x: f64,
    pub holder_w: f64,
    pub holder_wall_h: f64,
    pub arm: ArmModel,
}

impl Scene {
    /// Interior span of the holder (between the inner wall faces).
    pub fn holder_interior(&self) -> (f64, f64) {
        (self.holder_x - self.holder_w / 2.0, self.holder_x + self.holder_w / 2.0)
    }

    /// Holder floor height; the floor plate sits flush with the table.
    pub fn holder_floor_z(&self) -> f64 {
        self.table_z
    }

    pub fn wall_top_z(&self) -> f64 {
        self.table_z + self.holder_wall_h
    }

    /// Outer x-extents of the two walls: (left wall, right wall).
    pub fn wall_spans(&self) -> [(f64, f64); 2] {
        let (lo, hi) = self.holder_interior();
        [(lo - WALL_THICKNESS, lo), (hi, hi + WALL_THICKNESS)]
    }

    pub fn with_arm(mut self, arm: ArmModel) -> Self {
        self.arm = arm;
        self
    }

    /// Home end-effector pose: a fixed offset from the arm base, gripper
    /// pointing down. Tying home to the base keeps the whole world
    /// translation-equivariant.
    pub fn home_pose(&self) -> Pose {
        Pose::new(
            self.arm.base_x + HOME_OFFSET.0,
            self.arm.base_z + HOME_OFFSET.1,
            GRIP_DOWN,
        )
    }
}

/// The task distribution demonstrations are collected from: fixed table
/// height, fixed holder, block position uniform over a small range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDistribution {
    pub table_z: f64,
    pub block_x_range: [f64; 2],
    pub holder_x: f64,
    pub seed: u64,
}

impl TaskDistribution {
    pub fn training_default(seed: u64) -> Self {
        TaskDistribution {
            table_z: DEFAULT_TABLE_Z,
            block_x_range: DEFAULT_BLOCK_RANGE,
            holder_x: DEFAULT_HOLDER_X,
            seed,
        }
    }
}

/// Draw one task from the distribution. Only the block position is random;
/// everything else is fixed by the distribution.
pub fn sample_task(dist: &TaskDistribution, rng: &mut ChaCha8Rng) -> Scene {
    let [lo, hi] = dist.block_x_range;
    assert!(lo <= hi, "block_x_range needs lo <= hi");
    let block_x = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    Scene {
        table_z: dist.table_z,
        block_x,
        block_w: DEFAULT_BLOCK_W,
        block_h: DEFAULT_BLOCK_H,
        holder_x: dist.holder_x,
        holder_w: DEFAULT_HOLDER_W,
        holder_wall_h: DEFAULT_WALL_H,
        arm: arm_a(),
    }
}

/// Full simulator state. Immutable value; [`step`] returns a new one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub scene: Scene,
    pub joints: JointConfig,
    pub gripper_closed: bool,
    pub block_attached: bool,
    /// Block center, meters.
    pub block_pose: (f64, f64),
    /// Block center minus end-effector position, recorded when the gripper
    /// catches the block and constant while attached.
    pub grasp_offset: (f64, f64),
    pub step_count: u32,
}

impl WorldState {
    /// World at episode start: arm at home, gripper open, block on the table.
    pub fn init(scene: Scene) -> Result<Self, SimError> {
        let home = scene.home_pose();
        // bent-elbow seed: keeps the solve away from the stretch singularity
        let seed = JointConfig::new(vec![-0.6, -2.6, 1.6]);
        let joints = ik_solve(&scene.arm, home, &seed).map_err(SimError::HomeUnreachable)?;
        let block_pose = (scene.block_x, scene.table_z + scene.block_h / 2.0);
        Ok(WorldState {
            scene,
            joints,
            gripper_closed: false,
            block_attached: false,
            block_pose,
            grasp_offset: (0.0, 0.0),
            step_count: 0,
        })
    }

    pub fn eef(&self) -> Pose {
        forward_kinematics(&self.scene.arm, &self.joints).expect("joints match arm")
    }
}

/// Result of one simulator step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub world: WorldState,
    /// True when the action could not be executed (IK failure or the
    /// carried block would have been pushed through the table); the state
    /// is then unchanged except for the step counter.
    pub stalled: bool,
}

/// Resting height (block bottom) for a block footprint centered at `x`:
/// the highest support surface under it.
pub fn settle_rest_z(scene: &Scene, x: f64) -> f64 {
    let half = scene.block_w / 2.0;
    let (ext_lo, ext_hi) = (x - half, x + half);
    let overlaps = |lo: f64, hi: f64| ext_lo < hi && ext_hi > lo;

    let mut rest = scene.table_z; // table is the fallback support
    let (int_lo, int_hi) = scene.holder_interior();
    if overlaps(int_lo, int_hi) {
        rest = rest.max(scene.holder_floor_z());
    }
    for (lo, hi) in scene.wall_spans() {
        if overlaps(lo, hi) {
            rest = rest.max(scene.wall_top_z());
        }
    }
    rest
}

/// Advance the world by one action.
pub fn step(state: &WorldState, action: &Action) -> StepResult {
    let mut next = state.clone();
    next.step_count += 1;

    let new_joints = match apply_action(action, &state.scene.arm, &state.joints) {
        Ok(j) => j,
        Err(_) => return StepResult { world: next, stalled: true },
    };
    let eef = forward_kinematics(&state.scene.arm, &new_joints).expect("dims checked");

    // A carried block cannot be pushed through the table.
    if state.block_attached
        && eef.z + state.grasp_offset.1 - state.scene.block_h / 2.0
            < state.scene.table_z - 1e-9
    {
        return StepResult { world: next, stalled: true };
    }

    next.joints = new_joints;
    if next.block_attached {
        next.block_pose = (eef.x + next.grasp_offset.0, eef.z + next.grasp_offset.1);
    }

    let want_closed = action.close_commanded();
    if want_closed && !next.gripper_closed {
        // closing: catch the block if the gripper is on it. The block does
        // not move on grasp; the offset between it and the end-effector is
        // held for the duration of the grasp.
        let dx = next.block_pose.0 - eef.x;
        let dz = next.block_pose.1 - eef.z;
        if !next.block_attached && (dx * dx + dz * dz).sqrt() <= GRASP_TOL {
            next.block_attached = true;
            next.grasp_offset = (dx, dz);
        }
        next.gripper_closed = true;
    } else if !want_closed && next.gripper_closed {
        if next.block_attached {
            let rest = settle_rest_z(&next.scene, next.block_pose.0);
            next.block_pose.1 = rest + next.scene.block_h / 2.0;
            next.block_attached = false;
            next.grasp_offset = (0.0, 0.0);
        }
        next.gripper_closed = false;
    }

    StepResult { world: next, stalled: false }
}

/// Task success: the block is detached, resting on the holder floor, and
/// horizontally inside the holder interior.
pub fn success(state: &WorldState) -> bool {
    if state.block_attached {
        return false;
    }
    let scene = &state.scene;
    let bottom = state.block_pose.1 - scene.block_h / 2.0;
    if (bottom - scene.holder_floor_z()).abs() > 1e-9 {
        return false;
    }
    let half = scene.block_w / 2.0;
    let (lo, hi) = scene.holder_interior();
    state.block_pose.0 - half >= lo - 1e-9 && state.block_pose.0 + half <= hi + 1e-9
}
