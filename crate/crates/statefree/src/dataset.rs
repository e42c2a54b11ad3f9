//! On-disk demonstration datasets.
//!
//! A dataset is a JSON manifest next to a binary episodes file. The binary
//! layout is fixed: magic `SFLD`, format version, episode count, and the arm
//! DoF as little-endian u32s; then per episode a step count followed by raw
//! 64-bit floats — `(joints..., x, z, theta, gripper)` per step — and the
//! scene's numeric fields. Round trips are byte-exact.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::kinematics::{ArmModel, JointConfig, Pose};
use crate::sim::Scene;

pub const DATASET_MAGIC: [u8; 4] = *b"SFLD";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected SFLD, got {got:?}")]
    MagicMismatch { got: [u8; 4] },
    #[error("unsupported format version {got} (expected {DATASET_VERSION})")]
    VersionMismatch { got: u32 },
    #[error("file truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("episode count mismatch: manifest says {manifest}, binary holds {binary}")]
    CountMismatch { manifest: u32, binary: u32 },
    #[error("dataset contains an empty episode")]
    EmptyEpisode,
    #[error("dataset has no episodes")]
    EmptyDataset,
    #[error("episodes recorded on different arms")]
    MixedArms,
    #[error("manifest parse error: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// One recorded step: the raw trajectory, not an action. Action labels in
/// any space are derived from consecutive steps at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub joints: JointConfig,
    pub eef_pose: Pose,
    pub gripper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub task: Scene,
    pub steps: Vec<EpisodeStep>,
    /// Stream id the episode was recorded with (its index in the dataset).
    pub seed: u64,
}

/// Collection metadata saved as the JSON manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_episodes: u32,
    /// None when the dataset deliberately mixes table heights.
    pub table_z: Option<f64>,
    pub block_x_range: [f64; 2],
    pub holder_x: f64,
    pub seed: u64,
    pub rejections: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn arm(&self) -> &ArmModel {
        &self.episodes[0].task.arm
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if self.episodes.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        if self.episodes.iter().any(|e| e.steps.is_empty()) {
            return Err(DatasetError::EmptyEpisode);
        }
        let arm = self.arm();
        if self.episodes.iter().any(|e| &e.task.arm != arm) {
            return Err(DatasetError::MixedArms);
        }
        Ok(())
    }
}

fn binary_path(base: &Path) -> PathBuf {
    base.with_extension("sfld")
}

fn manifest_path(base: &Path) -> PathBuf {
    base.with_extension("manifest.json")
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn scene_floats(scene: &Scene) -> Vec<f64> {
    let mut v = vec![
        scene.table_z,
        scene.block_x,
        scene.block_w,
        scene.block_h,
        scene.holder_x,
        scene.holder_w,
        scene.holder_wall_h,
        scene.arm.base_x,
        scene.arm.base_z,
    ];
    v.extend_from_slice(&scene.arm.link_lengths);
    for lim in &scene.arm.joint_limits {
        v.push(lim[0]);
        v.push(lim[1]);
    }
    v
}

/// Serialize and write the dataset to `<base>.sfld` + `<base>.manifest.json`.
pub fn save_dataset(ds: &Dataset, base: &Path) -> Result<(), DatasetError> {
    ds.validate()?;
    let dof = ds.arm().dof();

    let mut buf = Vec::new();
    buf.extend_from_slice(&DATASET_MAGIC);
    put_u32(&mut buf, DATASET_VERSION);
    put_u32(&mut buf, ds.episodes.len() as u32);
    put_u32(&mut buf, dof as u32);
    for ep in &ds.episodes {
        put_u32(&mut buf, ep.steps.len() as u32);
        for step in &ep.steps {
            for a in &step.joints.angles {
                put_f64(&mut buf, *a);
            }
            put_f64(&mut buf, step.eef_pose.x);
            put_f64(&mut buf, step.eef_pose.z);
            put_f64(&mut buf, step.eef_pose.theta);
            put_f64(&mut buf, step.gripper);
        }
        for f in scene_floats(&ep.task) {
            put_f64(&mut buf, f);
        }
    }

    if let Some(dir) = base.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(binary_path(base))?;
    f.write_all(&buf)?;

    let manifest_json = serde_json::to_string_pretty(&ds.manifest)?;
    std::fs::write(manifest_path(base), manifest_json)?;
    Ok(())
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, buf: &mut [u8], context: &'static str) -> Result<(), DatasetError> {
        self.inner
            .read_exact(buf)
            .map_err(|_| DatasetError::Truncated { context })
    }

    fn u32(&mut self, context: &'static str) -> Result<u32, DatasetError> {
        let mut b = [0u8; 4];
        self.exact(&mut b, context)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, context: &'static str) -> Result<f64, DatasetError> {
        let mut b = [0u8; 8];
        self.exact(&mut b, context)?;
        Ok(f64::from_le_bytes(b))
    }
}

/// Load a dataset previously written by [`save_dataset`].
pub fn load_dataset(base: &Path) -> Result<Dataset, DatasetError> {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(manifest_path(base))?)?;
    let file = std::fs::File::open(binary_path(base))?;
    let mut r = Reader { inner: std::io::BufReader::new(file) };

    let mut magic = [0u8; 4];
    r.exact(&mut magic, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(DatasetError::MagicMismatch { got: magic });
    }
    let version = r.u32("version")?;
    if version != DATASET_VERSION {
        return Err(DatasetError::VersionMismatch { got: version });
    }
    let n_episodes = r.u32("episode count")?;
    let dof = r.u32("dof")? as usize;
    if n_episodes != manifest.n_episodes {
        return Err(DatasetError::CountMismatch { manifest: manifest.n_episodes, binary: n_episodes });
    }

    let mut episodes = Vec::with_capacity(n_episodes as usize);
    for index in 0..n_episodes {
        let n_steps = r.u32("step count")?;
        if n_steps == 0 {
            return Err(DatasetError::EmptyEpisode);
        }
        let mut steps = Vec::with_capacity(n_steps as usize);
        for _ in 0..n_steps {
            let mut angles = Vec::with_capacity(dof);
            for _ in 0..dof {
                angles.push(r.f64("joint angle")?);
            }
            let x = r.f64("eef x")?;
            let z = r.f64("eef z")?;
            let theta = r.f64("eef theta")?;
            let gripper = r.f64("gripper")?;
            steps.push(EpisodeStep {
                joints: JointConfig::new(angles),
                eef_pose: Pose { x, z, theta },
                gripper,
            });
        }
        let table_z = r.f64("scene")?;
        let block_x = r.f64("scene")?;
        let block_w = r.f64("scene")?;
        let block_h = r.f64("scene")?;
        let holder_x = r.f64("scene")?;
        let holder_w = r.f64("scene")?;
        let holder_wall_h = r.f64("scene")?;
        let base_x = r.f64("scene")?;
        let base_z = r.f64("scene")?;
        let mut links = Vec::with_capacity(dof);
        for _ in 0..dof {
            links.push(r.f64("link length")?);
        }
        let mut limits = Vec::with_capacity(dof);
        for _ in 0..dof {
            let lo = r.f64("joint limit")?;
            let hi = r.f64("joint limit")?;
            limits.push([lo, hi]);
        }
        let task = Scene {
            table_z,
            block_x,
            block_w,
            block_h,
            holder_x,
            holder_w,
            holder_wall_h,
            arm: ArmModel { base_x, base_z, link_lengths: links, joint_limits: limits },
        };
        episodes.push(Episode { task, steps, seed: index as u64 });
    }

    let ds = Dataset { episodes, manifest };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{arm_a, DEFAULT_BLOCK_RANGE, DEFAULT_HOLDER_X, DEFAULT_TABLE_Z};

    fn tiny_dataset() -> Dataset {
        let scene = Scene {
            table_z: DEFAULT_TABLE_Z,
            block_x: 0.41,
            block_w: 0.03,
            block_h: 0.04,
            holder_x: DEFAULT_HOLDER_X,
            holder_w: 0.07,
            holder_wall_h: 0.05,
            arm: arm_a(),
        };
        let step = |g: f64| EpisodeStep {
            joints: JointConfig::new(vec![-1.5, 0.3, -0.2]),
            eef_pose: Pose::new(0.5, 1.1, -1.5),
            gripper: g,
        };
        let episodes = vec![
            Episode { task: scene.clone(), steps: vec![step(-1.0), step(1.0)], seed: 0 },
            Episode { task: scene, steps: vec![step(-1.0), step(-1.0), step(1.0)], seed: 1 },
        ];
        Dataset {
            episodes,
            manifest: Manifest {
                n_episodes: 2,
                table_z: Some(DEFAULT_TABLE_Z),
                block_x_range: DEFAULT_BLOCK_RANGE,
                holder_x: DEFAULT_HOLDER_X,
                seed: 7,
                rejections: 0,
            },
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset();
        let base1 = dir.path().join("a");
        let base2 = dir.path().join("b");
        save_dataset(&ds, &base1).unwrap();
        let loaded = load_dataset(&base1).unwrap();
        assert_eq!(loaded, ds);
        save_dataset(&loaded, &base2).unwrap();
        let bytes1 = std::fs::read(base1.with_extension("sfld")).unwrap();
        let bytes2 = std::fs::read(base2.with_extension("sfld")).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn empty_episode_rejected_at_save() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = tiny_dataset();
        ds.episodes[1].steps.clear();
        let err = save_dataset(&ds, &dir.path().join("bad")).unwrap_err();
        assert!(matches!(err, DatasetError::EmptyEpisode));
    }

    #[test]
    fn corrupt_magic_detected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ds");
        save_dataset(&tiny_dataset(), &base).unwrap();
        let bin = base.with_extension("sfld");
        let mut bytes = std::fs::read(&bin).unwrap();
        bytes[1] ^= 0xFF;
        std::fs::write(&bin, &bytes).unwrap();
        assert!(matches!(load_dataset(&base), Err(DatasetError::MagicMismatch { .. })));
    }

    #[test]
    fn version_and_truncation_and_count_detected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ds");
        save_dataset(&tiny_dataset(), &base).unwrap();
        let bin = base.with_extension("sfld");
        let good = std::fs::read(&bin).unwrap();

        let mut wrong_version = good.clone();
        wrong_version[4] = 99;
        std::fs::write(&bin, &wrong_version).unwrap();
        assert!(matches!(load_dataset(&base), Err(DatasetError::VersionMismatch { got: 99 })));

        std::fs::write(&bin, &good[..good.len() - 5]).unwrap();
        assert!(matches!(load_dataset(&base), Err(DatasetError::Truncated { .. })));

        std::fs::write(&bin, &good).unwrap();
        let mani = base.with_extension("manifest.json");
        let mut m: Manifest =
            serde_json::from_str(&std::fs::read_to_string(&mani).unwrap()).unwrap();
        m.n_episodes = 5;
        std::fs::write(&mani, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(
            load_dataset(&base),
            Err(DatasetError::CountMismatch { manifest: 5, binary: 2 })
        ));
    }
}
