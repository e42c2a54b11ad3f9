//! The four action representations and their encode/execute maps.
//!
//! A recorded trajectory stores raw joint configurations; an [`Action`] in
//! any space is derived from a consecutive pair at training time and mapped
//! back onto the arm at execution time. Only the relative end-effector space
//! is invariant to rigid translations of the workspace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    compose, forward_kinematics, ik_solve, relative, ArmModel, JointConfig, KinematicsError, Pose,
};

#[derive(Debug, Error)]
pub enum ActionError {
    #[error("action motion has {got} entries, expected {expected} for {kind:?}")]
    MotionLength { kind: ActionSpaceKind, expected: usize, got: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// The action spaces under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSpaceKind {
    RelativeEEF,
    AbsoluteEEF,
    RelativeJoint,
    AbsoluteJoint,
}

impl ActionSpaceKind {
    pub const ALL: [ActionSpaceKind; 4] = [
        ActionSpaceKind::RelativeEEF,
        ActionSpaceKind::AbsoluteEEF,
        ActionSpaceKind::RelativeJoint,
        ActionSpaceKind::AbsoluteJoint,
    ];

    /// Length of the motion vector for this space on a `dof`-joint arm.
    pub fn motion_len(&self, dof: usize) -> usize {
        match self {
            ActionSpaceKind::RelativeEEF | ActionSpaceKind::AbsoluteEEF => 3,
            ActionSpaceKind::RelativeJoint | ActionSpaceKind::AbsoluteJoint => dof,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ActionSpaceKind::RelativeEEF => "rel-eef",
            ActionSpaceKind::AbsoluteEEF => "abs-eef",
            ActionSpaceKind::RelativeJoint => "rel-joint",
            ActionSpaceKind::AbsoluteJoint => "abs-joint",
        }
    }
}

/// A motion command plus a gripper channel in `[-1, 1]`; `>= 0` closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionSpaceKind,
    pub motion: Vec<f64>,
    pub gripper: f64,
}

impl Action {
    pub fn new(kind: ActionSpaceKind, motion: Vec<f64>, gripper: f64) -> Self {
        Action { kind, motion, gripper }
    }

    pub fn close_commanded(&self) -> bool {
        self.gripper >= 0.0
    }

    fn check_len(&self, dof: usize) -> Result<(), ActionError> {
        let expected = self.kind.motion_len(dof);
        if self.motion.len() == expected {
            Ok(())
        } else {
            Err(ActionError::MotionLength {
                kind: self.kind,
                expected,
                got: self.motion.len(),
            })
        }
    }
}

/// Derive the action label that carries the arm from `q_t` to `q_next`.
pub fn encode_action(
    kind: ActionSpaceKind,
    arm: &ArmModel,
    q_t: &JointConfig,
    q_next: &JointConfig,
    grip_next: f64,
) -> Result<Action, ActionError> {
    arm.check_dof(q_t)?;
    arm.check_dof(q_next)?;
    let motion = match kind {
        ActionSpaceKind::RelativeEEF => {
            let from = forward_kinematics(arm, q_t)?;
            let to = forward_kinematics(arm, q_next)?;
            relative(from, to).as_array().to_vec()
        }
        ActionSpaceKind::AbsoluteEEF => forward_kinematics(arm, q_next)?.as_array().to_vec(),
        ActionSpaceKind::RelativeJoint => {
            q_next.angles.iter().zip(&q_t.angles).map(|(n, t)| n - t).collect()
        }
        ActionSpaceKind::AbsoluteJoint => q_next.angles.clone(),
    };
    Ok(Action::new(kind, motion, grip_next))
}

/// Execute an action from `q_t`, returning the new joint configuration.
///
/// Joint-space actions update the joints directly (clamped to limits, with
/// the clamp flagged on the result). End-effector actions compute the target
/// pose and run IK seeded at `q_t`; IK failure propagates to the caller.
pub fn apply_action(
    action: &Action,
    arm: &ArmModel,
    q_t: &JointConfig,
) -> Result<JointConfig, ActionError> {
    arm.check_dof(q_t)?;
    action.check_len(arm.dof())?;
    match action.kind {
        ActionSpaceKind::RelativeJoint => {
            let next: Vec<f64> =
                q_t.angles.iter().zip(&action.motion).map(|(a, d)| a + d).collect();
            Ok(arm.clamp_joints(next))
        }
        ActionSpaceKind::AbsoluteJoint => Ok(arm.clamp_joints(action.motion.clone())),
        ActionSpaceKind::RelativeEEF => {
            let current = forward_kinematics(arm, q_t)?;
            let dp = Pose::new(action.motion[0], action.motion[1], action.motion[2]);
            let target = compose(current, dp);
            Ok(ik_solve(arm, target, q_t)?)
        }
        ActionSpaceKind::AbsoluteEEF => {
            let target = Pose::new(action.motion[0], action.motion[1], action.motion[2]);
            Ok(ik_solve(arm, target, q_t)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn arm() -> ArmModel {
        ArmModel::new(0.0, 0.0, vec![1.0, 1.0], vec![[-PI, PI]; 2])
    }

    #[test]
    fn relative_kinds_encode_zero_for_no_op() {
        let arm = arm();
        let q = JointConfig::new(vec![0.3, -0.4]);
        for kind in [ActionSpaceKind::RelativeEEF, ActionSpaceKind::RelativeJoint] {
            let a = encode_action(kind, &arm, &q, &q, -1.0).unwrap();
            assert!(a.motion.iter().all(|m| m.abs() < 1e-12), "{kind:?}");
        }
    }

    #[test]
    fn encode_matches_fk_difference() {
        let arm = arm();
        let q_t = JointConfig::new(vec![0.0, 0.0]);
        let q_next = JointConfig::new(vec![0.1, 0.0]);
        let a = encode_action(ActionSpaceKind::RelativeEEF, &arm, &q_t, &q_next, 1.0).unwrap();
        assert!((a.motion[0] - (-0.009991669443948599)).abs() < 1e-12);
        assert!((a.motion[1] - 0.1996668332936563).abs() < 1e-12);
        assert!((a.motion[2] - 0.1).abs() < 1e-12);

        let j = encode_action(ActionSpaceKind::RelativeJoint, &arm, &q_t, &q_next, 1.0).unwrap();
        assert_eq!(j.motion, vec![0.1, 0.0]);
        assert_eq!(j.gripper, 1.0);
    }

    #[test]
    fn zero_actions_leave_joints_fixed() {
        let arm = arm();
        let q = JointConfig::new(vec![0.5, -0.9]);
        let joint_zero = Action::new(ActionSpaceKind::RelativeJoint, vec![0.0, 0.0], -1.0);
        assert_eq!(apply_action(&joint_zero, &arm, &q).unwrap().angles, q.angles);

        let eef_zero = Action::new(ActionSpaceKind::RelativeEEF, vec![0.0, 0.0, 0.0], -1.0);
        let solved = apply_action(&eef_zero, &arm, &q).unwrap();
        for (a, b) in solved.angles.iter().zip(&q.angles) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn absolute_eef_reaches_target_pose() {
        let arm = arm();
        let q_goal = JointConfig::new(vec![0.9, -0.5]);
        let goal = forward_kinematics(&arm, &q_goal).unwrap();
        let act = Action::new(ActionSpaceKind::AbsoluteEEF, goal.as_array().to_vec(), -1.0);
        let from = JointConfig::new(vec![0.7, -0.3]);
        let solved = apply_action(&act, &arm, &from).unwrap();
        let fk = forward_kinematics(&arm, &solved).unwrap();
        assert!((fk.x - goal.x).abs() < 1e-6);
        assert!((fk.z - goal.z).abs() < 1e-6);
    }

    #[test]
    fn encode_apply_round_trip_all_kinds() {
        let arm = arm();
        let q_t = JointConfig::new(vec![0.4, -0.6]);
        let q_next = JointConfig::new(vec![0.47, -0.52]);
        let goal = forward_kinematics(&arm, &q_next).unwrap();
        for kind in ActionSpaceKind::ALL {
            let a = encode_action(kind, &arm, &q_t, &q_next, 1.0).unwrap();
            let landed = apply_action(&a, &arm, &q_t).unwrap();
            let fk = forward_kinematics(&arm, &landed).unwrap();
            assert!((fk.x - goal.x).abs() < 1e-6, "{kind:?}");
            assert!((fk.z - goal.z).abs() < 1e-6, "{kind:?}");
        }
    }

    #[test]
    fn relative_eef_is_translation_invariant_joints_are_not() {
        // Same physical displacement executed from a shifted base: the
        // relative EEF label is unchanged exactly; the joint label is not.
        let arm_a = ArmModel::new(0.0, 0.0, vec![0.3, 0.25, 0.2], vec![[-PI, PI]; 3]);
        let arm_b = ArmModel::new(0.37, -0.21, vec![0.3, 0.25, 0.2], vec![[-PI, PI]; 3]);
        let q_t = JointConfig::new(vec![0.4, -0.6, 0.3]);
        let q_next = JointConfig::new(vec![0.47, -0.52, 0.24]);

        let rel_a = encode_action(ActionSpaceKind::RelativeEEF, &arm_a, &q_t, &q_next, 1.0).unwrap();
        let rel_b = encode_action(ActionSpaceKind::RelativeEEF, &arm_b, &q_t, &q_next, 1.0).unwrap();
        assert_eq!(rel_a.motion, rel_b.motion);

        // joint-space witness: realize the same EEF displacement from a
        // different starting configuration and the joint delta changes.
        let start = forward_kinematics(&arm_a, &q_t).unwrap();
        let goal = forward_kinematics(&arm_a, &q_next).unwrap();
        let dp = relative(start, goal);
        let q_t2 = JointConfig::new(vec![0.9, -1.2, 0.5]);
        let start2 = forward_kinematics(&arm_a, &q_t2).unwrap();
        let q_next2 = ik_solve(&arm_a, compose(start2, dp), &q_t2).unwrap();
        let joint_1 =
            encode_action(ActionSpaceKind::RelativeJoint, &arm_a, &q_t, &q_next, 1.0).unwrap();
        let joint_2 =
            encode_action(ActionSpaceKind::RelativeJoint, &arm_a, &q_t2, &q_next2, 1.0).unwrap();
        let diff: f64 = joint_1
            .motion
            .iter()
            .zip(&joint_2.motion)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-3, "joint deltas should differ, diff={diff}");
    }

    #[test]
    fn motion_length_checked() {
        let arm = arm();
        let bad = Action::new(ActionSpaceKind::RelativeEEF, vec![0.0, 0.0], -1.0);
        assert!(matches!(
            apply_action(&bad, &arm, &JointConfig::new(vec![0.0, 0.0])),
            Err(ActionError::MotionLength { .. })
        ));
    }
}
