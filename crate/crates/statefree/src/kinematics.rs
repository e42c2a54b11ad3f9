//! Pose algebra and planar-chain kinematics.
//!
//! The world is a vertical plane: `x` horizontal, `z` up, orientation a
//! single angle stored in `(-PI, PI]`. An [`ArmModel`] is a serial chain of
//! revolute joints; [`forward_kinematics`] maps joint angles to the
//! end-effector pose and [`ik_solve`] inverts it with damped least squares.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Damping factor for the least-squares IK update.
const IK_DAMPING: f64 = 1e-3;
/// Per-iteration cap on any joint update, radians.
const IK_STEP_CAP: f64 = 0.2;
/// Iteration budget before IK gives up.
const IK_MAX_ITERS: usize = 200;
/// Residual norm below which IK declares convergence.
const IK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("joint vector has {got} entries, arm has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("IK did not converge within {iters} iterations (best residual {residual:.3e})")]
    IkFailure { iters: usize, residual: f64 },
}

/// Normalize an angle to `(-PI, PI]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Planar end-effector pose: position in meters, orientation in radians.
///
/// `theta` is normalized to `(-PI, PI]` on construction and after every
/// operation that touches it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, z: f64, theta: f64) -> Self {
        Pose { x, z, theta: wrap_angle(theta) }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.z, self.theta]
    }
}

/// Compose a pose with a displacement: translation deltas add along the
/// world axes, angles add on the circle.
pub fn compose(p: Pose, dp: Pose) -> Pose {
    Pose::new(p.x + dp.x, p.z + dp.z, p.theta + dp.theta)
}

/// Displacement taking `p_from` to `p_to`; inverse of [`compose`].
///
/// The angular component is the shortest signed difference.
pub fn relative(p_from: Pose, p_to: Pose) -> Pose {
    Pose::new(p_to.x - p_from.x, p_to.z - p_from.z, wrap_angle(p_to.theta - p_from.theta))
}

/// Joint angles of an arm, radians. `clamped` records whether the most
/// recent update had to be clipped to the arm's joint limits; clamping is
/// flagged, never silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub angles: Vec<f64>,
    #[serde(default)]
    pub clamped: bool,
}

impl JointConfig {
    pub fn new(angles: Vec<f64>) -> Self {
        JointConfig { angles, clamped: false }
    }

    pub fn dof(&self) -> usize {
        self.angles.len()
    }
}

/// A planar serial chain: base position, link lengths, per-joint limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub base_x: f64,
    pub base_z: f64,
    pub link_lengths: Vec<f64>,
    /// Per-joint `[lo, hi]` bounds, radians.
    pub joint_limits: Vec<[f64; 2]>,
}

impl ArmModel {
    /// Build an arm, checking the structural invariants.
    pub fn new(
        base_x: f64,
        base_z: f64,
        link_lengths: Vec<f64>,
        joint_limits: Vec<[f64; 2]>,
    ) -> Self {
        assert!(link_lengths.len() >= 2, "arm needs at least two links");
        assert_eq!(link_lengths.len(), joint_limits.len());
        assert!(link_lengths.iter().all(|&l| l > 0.0), "link lengths must be positive");
        assert!(joint_limits.iter().all(|lim| lim[0] < lim[1]), "joint limits need lo < hi");
        ArmModel { base_x, base_z, link_lengths, joint_limits }
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn check_dof(&self, q: &JointConfig) -> Result<(), KinematicsError> {
        if q.dof() == self.dof() {
            Ok(())
        } else {
            Err(KinematicsError::DimensionMismatch { expected: self.dof(), got: q.dof() })
        }
    }

    /// Clip `angles` into the joint limits, flagging whether anything moved.
    pub fn clamp_joints(&self, angles: Vec<f64>) -> JointConfig {
        let mut clamped = false;
        let clipped: Vec<f64> = angles
            .into_iter()
            .zip(&self.joint_limits)
            .map(|(a, lim)| {
                let c = a.clamp(lim[0], lim[1]);
                if c != a {
                    clamped = true;
                }
                c
            })
            .collect();
        JointConfig { angles: clipped, clamped }
    }

    /// End-effector offset from the base, plus orientation. Never touches the
    /// base coordinates, which keeps base-relative computations exact.
    pub fn chain_offset(&self, q: &JointConfig) -> (f64, f64, f64) {
        let mut cum = 0.0;
        let mut x = 0.0;
        let mut z = 0.0;
        for (l, a) in self.link_lengths.iter().zip(&q.angles) {
            cum += a;
            x += l * cum.cos();
            z += l * cum.sin();
        }
        (x, z, cum)
    }

    /// World positions of every joint pivot and the tip, base first.
    pub fn link_points(&self, q: &JointConfig) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.dof() + 1);
        let mut cum = 0.0;
        let mut x = self.base_x;
        let mut z = self.base_z;
        pts.push((x, z));
        for (l, a) in self.link_lengths.iter().zip(&q.angles) {
            cum += a;
            x += l * cum.cos();
            z += l * cum.sin();
            pts.push((x, z));
        }
        pts
    }
}

/// Tip pose of the chain at joint angles `q`.
pub fn forward_kinematics(arm: &ArmModel, q: &JointConfig) -> Result<Pose, KinematicsError> {
    arm.check_dof(q)?;
    let (x, z, theta) = arm.chain_offset(q);
    Ok(Pose::new(arm.base_x + x, arm.base_z + z, theta))
}

/// End-effector displacement produced by the joint delta `dq` applied at `q`.
///
/// This is where the joint action space picks up its dependence on the
/// current configuration: the same `dq` at a different `q` gives a different
/// tip displacement.
pub fn joint_delta_to_eef_delta(
    arm: &ArmModel,
    q: &JointConfig,
    dq: &JointConfig,
) -> Result<Pose, KinematicsError> {
    arm.check_dof(q)?;
    arm.check_dof(dq)?;
    let before = forward_kinematics(arm, q)?;
    let shifted: Vec<f64> = q.angles.iter().zip(&dq.angles).map(|(a, d)| a + d).collect();
    let after = forward_kinematics(arm, &JointConfig::new(shifted))?;
    Ok(relative(before, after))
}

/// 3x3 linear solve by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        for row in col + 1..3 {
            let f = a[row][col] / diag;
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Damped-least-squares inverse kinematics from `seed`.
///
/// Iterates `dq = J^T (J J^T + d^2 I)^{-1} e` with per-joint step capping
/// and joint-limit projection. The target is expressed relative to the arm
/// base before iterating, so the solution depends only on base-relative
/// geometry.
pub fn ik_solve(
    arm: &ArmModel,
    target: Pose,
    seed: &JointConfig,
) -> Result<JointConfig, KinematicsError> {
    arm.check_dof(seed)?;
    let dof = arm.dof();
    let target_rel = (target.x - arm.base_x, target.z - arm.base_z);

    let residual_at = |q: &JointConfig| -> (f64, [f64; 3]) {
        let (ox, oz, otheta) = arm.chain_offset(q);
        let err = [target_rel.0 - ox, target_rel.1 - oz, wrap_angle(target.theta - otheta)];
        ((err[0] * err[0] + err[1] * err[1] + err[2] * err[2]).sqrt(), err)
    };

    let mut q = arm.clamp_joints(seed.angles.clone());
    q.clamped = false;
    let mut best_residual = f64::INFINITY;

    for iter in 0..=IK_MAX_ITERS {
        let (residual, err) = residual_at(&q);
        if residual < best_residual {
            best_residual = residual;
        }
        if residual < IK_TOLERANCE {
            return Ok(q);
        }
        if iter == IK_MAX_ITERS {
            break;
        }

        // Jacobian, 3 x dof: column j is the tip velocity from joint j.
        let mut jac = vec![[0.0f64; 3]; dof];
        let mut cum = 0.0;
        let mut partial: Vec<(f64, f64)> = Vec::with_capacity(dof);
        for (l, a) in arm.link_lengths.iter().zip(&q.angles) {
            cum += a;
            partial.push((l * cum.cos(), l * cum.sin()));
        }
        // suffix sums: joint j moves every link at or after it
        let mut sx = 0.0;
        let mut sz = 0.0;
        for j in (0..dof).rev() {
            sx += partial[j].0;
            sz += partial[j].1;
            jac[j] = [-sz, sx, 1.0];
        }

        // J J^T + d^2 I  (3x3)
        let mut jjt = [[0.0f64; 3]; 3];
        for row in 0..3 {
            for col in 0..3 {
                let mut acc = 0.0;
                for j in 0..dof {
                    acc += jac[j][row] * jac[j][col];
                }
                jjt[row][col] = acc;
            }
            jjt[row][row] += IK_DAMPING * IK_DAMPING;
        }
        let y = solve3(jjt, err);

        let mut dq: Vec<f64> = (0..dof)
            .map(|j| jac[j][0] * y[0] + jac[j][1] * y[1] + jac[j][2] * y[2])
            .collect();
        let max_step = dq.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if max_step > IK_STEP_CAP {
            let scale = IK_STEP_CAP / max_step;
            for d in &mut dq {
                *d *= scale;
            }
        }
        // line search along the DLS direction. Expanded scales recover the
        // Newton step where the damping over-shrinks it (near-singular
        // stretches); shrunk scales tame overshoot. Greedy best keeps the
        // residual monotone.
        let mut best_cand: Option<(f64, JointConfig)> = None;
        for scale in [16.0, 4.0, 1.0, 0.25, 0.0625, 1.0 / 64.0] {
            let next: Vec<f64> =
                q.angles.iter().zip(&dq).map(|(a, d)| a + scale * d).collect();
            let cand = arm.clamp_joints(next);
            let r = residual_at(&cand).0;
            if best_cand.as_ref().map_or(true, |(br, _)| r < *br) {
                best_cand = Some((r, cand));
            }
        }
        let (cand_res, cand) = best_cand.expect("non-empty scale list");
        if cand_res < residual {
            q = cand;
        } else {
            // plateau: nudge along the direction so the iteration keeps moving
            let next: Vec<f64> =
                q.angles.iter().zip(&dq).map(|(a, d)| a + d / 128.0).collect();
            q = arm.clamp_joints(next);
        }
        q.clamped = false;
    }

    Err(KinematicsError::IkFailure { iters: IK_MAX_ITERS, residual: best_residual })
}
