//! Ablation grids: train (or fetch cached) one model per cell, evaluate the
//! requested protocols, emit one row per (cell, protocol).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::action::ActionSpaceKind;
use crate::dataset::Dataset;
use crate::evalsuite::{hex16, run_protocol, run_protocol_hacked, Protocol, SuccessReport};
use crate::expert::{record_dataset_with, record_diverse_heights, ExpertError};
use crate::kinematics::ArmModel;
use crate::learner::model::{load_model, save_model};
use crate::learner::train::{train_bc_from, Model, TrainConfig, TrainError};
use crate::sensing::{CameraPreset, ObservationConfig, StateMode};
use crate::sim::TaskDistribution;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("training failed: {0}")]
    Train(#[from] TrainError),
    #[error("demonstration recording failed: {0}")]
    Record(#[from] ExpertError),
}

/// Which demonstration corpus a cell trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetPreset {
    /// Fixed table height, constrained block range.
    Standard,
    /// The diverse-data baseline: 1 cm table-height grid, 75-84 cm.
    DiverseHeights,
}

impl DatasetPreset {
    pub fn label(&self) -> &'static str {
        match self {
            DatasetPreset::Standard => "standard",
            DatasetPreset::DiverseHeights => "diverse-heights",
        }
    }
}

/// One training configuration in a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub label: String,
    pub state_mode: StateMode,
    pub state_noise_z: f64,
    pub camera_preset: CameraPreset,
    pub action_space: ActionSpaceKind,
    pub n_episodes: u32,
    pub epochs: usize,
    pub dataset: DatasetPreset,
    /// Apply the correct state hack at evaluation time.
    pub eval_state_hack: bool,
}

impl CellSpec {
    /// The reference configuration: state-free, relative EEF, overhead plus
    /// dual wide wrist cameras, 300 episodes, 4 epochs.
    pub fn default_state_free() -> Self {
        CellSpec {
            label: "state-free".into(),
            state_mode: StateMode::None,
            state_noise_z: 0.0,
            camera_preset: CameraPreset::OverheadDualWide,
            action_space: ActionSpaceKind::RelativeEEF,
            n_episodes: 300,
            epochs: 4,
            dataset: DatasetPreset::Standard,
            eval_state_hack: false,
        }
    }

    /// Same sensors, but with the end-effector pose fed to the policy.
    pub fn default_state_based() -> Self {
        CellSpec {
            label: "state-based".into(),
            state_mode: StateMode::EEFPose,
            ..Self::default_state_free()
        }
    }

    pub fn obs_config(&self) -> ObservationConfig {
        ObservationConfig::new(self.camera_preset, self.state_mode)
            .with_state_noise(self.state_noise_z)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(self.action_space, self.obs_config(), seed);
        cfg.epochs = self.epochs;
        cfg
    }
}

/// Key under which a trained model is cached.
#[derive(Serialize)]
struct ModelKey<'a> {
    cell: &'a CellSpec,
    seed: u64,
    arm: Option<&'a ArmModel>,
}

pub fn model_fingerprint(cell: &CellSpec, seed: u64, arm: Option<&ArmModel>) -> String {
    let key = ModelKey { cell, seed, arm };
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&key).unwrap());
    hex16(&hasher.finalize())
}

/// Shared training context: datasets and models are built once per
/// fingerprint and reused across grid cells (and, when `out_dir` is set,
/// across processes via `<out_dir>/models`).
pub struct ExperimentContext {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    models: HashMap<String, Arc<Model>>,
    datasets: HashMap<String, Arc<Dataset>>,
}

impl ExperimentContext {
    pub fn new(seed: u64) -> Self {
        ExperimentContext { seed, out_dir: None, models: HashMap::new(), datasets: HashMap::new() }
    }

    pub fn with_out_dir(mut self, dir: PathBuf) -> Self {
        self.out_dir = Some(dir);
        self
    }

    /// Demonstrations for a cell. Recording seed is the context seed, so
    /// every cell trained under this context shares one corpus per
    /// (preset, episode count, arm).
    pub fn dataset(
        &mut self,
        preset: DatasetPreset,
        n_episodes: u32,
        arm: Option<&ArmModel>,
    ) -> Result<Arc<Dataset>, crate::expert::ExpertError> {
        let key = format!(
            "{}-{}-{}",
            preset.label(),
            n_episodes,
            arm.map_or("default".to_string(), |a| format!("{:.3}-{:.3}", a.base_x, a.base_z))
        );
        if let Some(ds) = self.datasets.get(&key) {
            return Ok(ds.clone());
        }
        let dist = TaskDistribution::training_default(self.seed);
        let ds = match preset {
            DatasetPreset::Standard => {
                record_dataset_with(&dist, n_episodes, self.seed, arm.cloned(), None)?
            }
            DatasetPreset::DiverseHeights => {
                assert!(arm.is_none(), "diverse preset records on the default arm");
                record_diverse_heights(self.seed, n_episodes / 10)?
            }
        };
        let ds = Arc::new(ds);
        self.datasets.insert(key, ds.clone());
        Ok(ds)
    }

    /// Train (or fetch) the model for a cell at `seed`.
    pub fn model(&mut self, cell: &CellSpec, seed: u64) -> Result<Arc<Model>, GridError> {
        self.model_on(cell, seed, None, None)
    }

    /// As [`Self::model`], with an arm override and optional checkpoint to
    /// fine-tune from.
    pub fn model_on(
        &mut self,
        cell: &CellSpec,
        seed: u64,
        arm: Option<&ArmModel>,
        checkpoint: Option<&Model>,
    ) -> Result<Arc<Model>, GridError> {
        let fp = model_fingerprint(cell, seed, arm);
        if let Some(m) = self.models.get(&fp) {
            return Ok(m.clone());
        }
        if let Some(dir) = &self.out_dir {
            let path = dir.join("models").join(format!("{fp}.sfpm"));
            if path.exists() {
                if let Ok(m) = load_model(&path) {
                    let m = Arc::new(m);
                    self.models.insert(fp, m.clone());
                    return Ok(m);
                }
            }
        }
        let ds = self.dataset(cell.dataset, cell.n_episodes, arm)?;
        let cfg = cell.train_config(seed);
        let model = train_bc_from(&ds, &cfg, checkpoint)?;
        let model = Arc::new(model);
        if let Some(dir) = &self.out_dir {
            let path = dir.join("models").join(format!("{fp}.sfpm"));
            let _ = save_model(&model, &path);
        }
        self.models.insert(fp, model.clone());
        Ok(model)
    }
}

/// One emitted grid row: a cell evaluated on one protocol (aggregated over
/// its conditions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub config_fingerprint: String,
    pub label: String,
    pub state_mode: String,
    pub cameras: String,
    pub action_space: String,
    pub n_episodes: u32,
    pub epochs: usize,
    pub dataset: String,
    pub protocol: String,
    pub condition: String,
    pub successes: u32,
    pub trials: u32,
    pub score: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    /// Cells that failed to train, with the error text; the grid continues.
    pub errors: Vec<(String, String)>,
}

impl GridReport {
    /// The per-condition detail reports backing each row.
    pub fn find(&self, label: &str, protocol: &str) -> Option<&GridRow> {
        self.rows.iter().find(|r| r.label == label && r.protocol == protocol)
    }
}

fn row_from_report(cell: &CellSpec, fp: &str, report: &SuccessReport) -> GridRow {
    GridRow {
        config_fingerprint: fp.to_string(),
        label: cell.label.clone(),
        state_mode: cell.state_mode.label().to_string(),
        cameras: cell.camera_preset.label().to_string(),
        action_space: cell.action_space.label().to_string(),
        n_episodes: cell.n_episodes,
        epochs: cell.epochs,
        dataset: cell.dataset.label().to_string(),
        protocol: report.protocol.clone(),
        condition: "all".into(),
        successes: report.total_successes(),
        trials: report.total_trials(),
        score: report.score,
    }
}

/// Train and evaluate every (cell, protocol) pair.
pub fn run_ablation_grid(
    ctx: &mut ExperimentContext,
    cells: &[CellSpec],
    protocols: &[Protocol],
    seed: u64,
) -> GridReport {
    let mut report = GridReport::default();
    for cell in cells {
        let model = match ctx.model(cell, seed) {
            Ok(m) => m,
            Err(e) => {
                report.errors.push((cell.label.clone(), e.to_string()));
                continue;
            }
        };
        let fp = model_fingerprint(cell, seed, None);
        for protocol in protocols {
            let rep = if cell.eval_state_hack {
                run_protocol_hacked(&model, protocol, seed)
            } else {
                run_protocol(&model, protocol, seed, None)
            };
            report.rows.push(row_from_report(cell, &fp, &rep));
        }
    }
    report
}

/// Named grid presets mirroring the experiment tables.
pub fn preset(name: &str) -> Option<(Vec<CellSpec>, Vec<Protocol>)> {
    let sf = CellSpec::default_state_free;
    let sb = CellSpec::default_state_based;
    match name {
        // state ablation: plain state, state hack, noise augmentation, no state
        "table1" => {
            let cells = vec![
                CellSpec { label: "w-state".into(), ..sb() },
                CellSpec { label: "state-hack".into(), eval_state_hack: true, ..sb() },
                CellSpec { label: "noise-aug".into(), state_noise_z: 0.05, ..sb() },
                CellSpec { label: "wo-state".into(), ..sf() },
            ];
            Some((cells, vec![Protocol::in_domain(), Protocol::height()]))
        }
        // action-space comparison
        "table2" => {
            let cells = ActionSpaceKind::ALL
                .into_iter()
                .map(|k| CellSpec {
                    label: k.label().into(),
                    action_space: k,
                    ..sf()
                })
                .collect();
            Some((
                cells,
                vec![Protocol::in_domain(), Protocol::height(), Protocol::horizontal()],
            ))
        }
        // observation levels
        "table3" => {
            let cells = CameraPreset::ALL
                .into_iter()
                .map(|p| CellSpec {
                    label: p.label().into(),
                    camera_preset: p,
                    ..sf()
                })
                .collect();
            Some((cells, vec![Protocol::height(), Protocol::horizontal()]))
        }
        // overhead camera under the stress conditions, one protocol per
        // condition so the per-condition scores stay visible
        "table5" => {
            let cells = vec![
                CellSpec { label: "with-overhead".into(), ..sf() },
                CellSpec {
                    label: "without-overhead".into(),
                    camera_preset: CameraPreset::DualWideOnly,
                    ..sf()
                },
            ];
            let protocols = Protocol::extreme()
                .conditions
                .into_iter()
                .map(|c| Protocol {
                    name: format!("extreme-{}", c.name),
                    conditions: vec![c],
                    n_trials: 30,
                })
                .collect();
            Some((cells, protocols))
        }
        // data efficiency
        "fig6" => {
            let mut cells = Vec::new();
            for n in [50u32, 100, 200, 300] {
                for (mode_label, mode) in [("w-state", StateMode::EEFPose), ("wo-state", StateMode::None)] {
                    for epochs in [2usize, 4] {
                        cells.push(CellSpec {
                            label: format!("{mode_label}-n{n}-e{epochs}"),
                            state_mode: mode,
                            n_episodes: n,
                            epochs,
                            ..sf()
                        });
                    }
                }
            }
            Some((cells, vec![Protocol::in_domain()]))
        }
        // state-input rescue strategies, height generalization only
        "appendix-diverse" => {
            let cells = vec![
                CellSpec { label: "wo-state".into(), ..sf() },
                CellSpec { label: "noise-aug".into(), state_noise_z: 0.05, ..sb() },
                CellSpec {
                    label: "diverse-data".into(),
                    dataset: DatasetPreset::DiverseHeights,
                    ..sb()
                },
                CellSpec { label: "w-state".into(), ..sb() },
            ];
            Some((cells, vec![Protocol::height()]))
        }
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 6] =
    ["table1", "table2", "table3", "table5", "fig6", "appendix-diverse"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_shapes() {
        let (c1, p1) = preset("table1").unwrap();
        assert_eq!((c1.len(), p1.len()), (4, 2));
        let (c2, p2) = preset("table2").unwrap();
        assert_eq!(c2.len() * p2.len(), 12);
        let (c3, p3) = preset("table3").unwrap();
        assert_eq!(c3.len() * p3.len(), 12);
        let (c5, p5) = preset("table5").unwrap();
        assert_eq!(c5.len() * p5.len(), 6);
        let (c6, p6) = preset("fig6").unwrap();
        assert_eq!(c6.len() * p6.len(), 16);
        assert!(preset("nope").is_none());
    }

    #[test]
    fn fingerprints_distinguish_cells_and_seeds() {
        let a = model_fingerprint(&CellSpec::default_state_free(), 1, None);
        let b = model_fingerprint(&CellSpec::default_state_based(), 1, None);
        let c = model_fingerprint(&CellSpec::default_state_free(), 2, None);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, model_fingerprint(&CellSpec::default_state_free(), 1, None));
    }

    #[test]
    fn tiny_grid_runs_end_to_end() {
        let mut ctx = ExperimentContext::new(55);
        let mut cell = CellSpec::default_state_free();
        cell.n_episodes = 4;
        cell.epochs = 1;
        let cells = vec![cell];
        let protocols = vec![Protocol::in_domain().with_trials(2)];
        let report = run_ablation_grid(&mut ctx, &cells, &protocols, 55);
        assert_eq!(report.rows.len(), 1);
        assert!(report.errors.is_empty());
        let row = &report.rows[0];
        assert_eq!(row.trials, 2);
        assert!(row.successes <= row.trials);
        // cache hit: rerunning reuses the model without retraining
        let report2 = run_ablation_grid(&mut ctx, &cells, &protocols, 55);
        assert_eq!(report2.rows, report.rows);
    }
}
