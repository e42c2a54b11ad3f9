//! Run configuration: one JSON file that covers task distribution, sensors,
//! training, and evaluation selections. Unknown keys are rejected; every
//! run echoes the fully-resolved configuration into `run.json` so results
//! are reproducible from their output directory alone.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::action::ActionSpaceKind;
use crate::evalsuite::Protocol;
use crate::learner::train::TrainConfig;
use crate::sensing::{CameraPreset, ObservationConfig, StateMode};
use crate::sim::TaskDistribution;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Forces single-threaded reductions. The library is single-threaded
    /// throughout, so this is a guarantee rather than a switch; it is
    /// recorded in `run.json` either way.
    pub deterministic: bool,
    pub task: TaskDistribution,
    /// Camera preset label, e.g. "overhead+dual-wide".
    pub cameras: String,
    /// "none", "eef-pose", or "joints".
    pub state_mode: String,
    pub state_noise_z: f64,
    pub state_hack_dz: f64,
    /// "rel-eef", "abs-eef", "rel-joint", or "abs-joint".
    pub action_space: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub n_episodes: u32,
    /// "in-domain", "height", "horizontal", or "extreme".
    pub protocol: String,
    pub trials: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            deterministic: true,
            task: TaskDistribution::training_default(0),
            cameras: CameraPreset::OverheadDualWide.label().into(),
            state_mode: StateMode::None.label().into(),
            state_noise_z: 0.0,
            state_hack_dz: 0.0,
            action_space: ActionSpaceKind::RelativeEEF.label().into(),
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 4,
            n_episodes: 300,
            protocol: "in-domain".into(),
            trials: 30,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.camera_preset()?;
        self.parsed_state_mode()?;
        self.parsed_action_space()?;
        self.parsed_protocol()?;
        if self.learning_rate <= 0.0 {
            return Err(ConfigError::Invalid("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be positive".into()));
        }
        if self.n_episodes == 0 {
            return Err(ConfigError::Invalid("n_episodes must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        if self.state_noise_z < 0.0 {
            return Err(ConfigError::Invalid("state_noise_z must be non-negative".into()));
        }
        if self.task.block_x_range[0] > self.task.block_x_range[1] {
            return Err(ConfigError::Invalid("block_x_range needs lo <= hi".into()));
        }
        Ok(())
    }

    pub fn camera_preset(&self) -> Result<CameraPreset, ConfigError> {
        CameraPreset::from_label(&self.cameras)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown camera preset '{}'", self.cameras)))
    }

    pub fn parsed_state_mode(&self) -> Result<StateMode, ConfigError> {
        match self.state_mode.as_str() {
            "none" => Ok(StateMode::None),
            "eef-pose" => Ok(StateMode::EEFPose),
            "joints" => Ok(StateMode::Joints),
            other => Err(ConfigError::Invalid(format!("unknown state_mode '{other}'"))),
        }
    }

    pub fn parsed_action_space(&self) -> Result<ActionSpaceKind, ConfigError> {
        ActionSpaceKind::ALL
            .into_iter()
            .find(|k| k.label() == self.action_space)
            .ok_or_else(|| {
                ConfigError::Invalid(format!("unknown action_space '{}'", self.action_space))
            })
    }

    pub fn parsed_protocol(&self) -> Result<Protocol, ConfigError> {
        Protocol::by_name(&self.protocol)
            .map(|p| p.with_trials(self.trials))
            .ok_or_else(|| ConfigError::Invalid(format!("unknown protocol '{}'", self.protocol)))
    }

    pub fn obs_config(&self) -> Result<ObservationConfig, ConfigError> {
        Ok(ObservationConfig::new(self.camera_preset()?, self.parsed_state_mode()?)
            .with_state_noise(self.state_noise_z)
            .with_state_hack(self.state_hack_dz))
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let mut obs = self.obs_config()?;
        obs.state_hack_dz = 0.0; // the hack is evaluation-time only
        let mut cfg = TrainConfig::new(self.parsed_action_space()?, obs, self.seed);
        cfg.learning_rate = self.learning_rate;
        cfg.batch_size = self.batch_size;
        cfg.epochs = self.epochs;
        Ok(cfg)
    }

    /// Echo the fully-resolved configuration (defaults included) into
    /// `<out_dir>/run.json`.
    pub fn write_run_echo(&self) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join("run.json");
        std::fs::write(&path, serde_json::to_string_pretty(self).unwrap())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 3, "not_a_field": 1}"#).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = RunConfig::load(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/config.json"));
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = RunConfig::default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.cameras = "garbage".into();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.protocol = "sideways".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_config_fills_defaults_and_echoes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            format!(
                r#"{{"seed": 9, "state_mode": "eef-pose", "out_dir": "{}"}}"#,
                dir.path().join("out").display()
            ),
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.epochs, 4);
        assert_eq!(cfg.parsed_state_mode().unwrap(), StateMode::EEFPose);
        let echo = cfg.write_run_echo().unwrap();
        let back: RunConfig =
            serde_json::from_str(&std::fs::read_to_string(echo).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
