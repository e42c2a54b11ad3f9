//! Behavior cloning: replay recorded episodes into (observation, action)
//! pairs, normalize, and regress the policy network onto the labels with
//! Adam. Everything is seeded and single-threaded, so a (dataset, config)
//! pair maps to exactly one set of weights.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{encode_action, Action, ActionSpaceKind};
use crate::dataset::Dataset;
use crate::learner::net::{NetError, PolicyNet};
use crate::rngstream::stream;
use crate::sensing::{observe, ObservationConfig};
use crate::sim::{step, SimError, WorldState};

/// Hidden layer widths of the policy network.
pub const HIDDEN_SIZES: [usize; 2] = [128, 64];
/// Uniform dither half-range added to training pixels. Gives dead pixels a
/// gradient signal that drives their weights toward zero, so pixels that
/// only move out of distribution (a shifted table seen by the overhead
/// camera) cannot corrupt the features at evaluation time.
pub const PIXEL_DITHER: f64 = 0.005;
/// Input standardization keeps per-dimension statistics but never scales a
/// dimension up by more than 1/0.05: pixels live in [0, 1], so a dimension
/// quieter than this carries no signal worth amplifying.
pub const INPUT_STD_FLOOR: f64 = 0.05;

/// Stream ids used under the training seed.
const STREAM_INIT: u64 = 1 << 32;
const STREAM_SHUFFLE: u64 = (1 << 32) + 1;
const STREAM_DITHER_BASE: u64 = 0;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("replayed episode diverged from its recording at step {step}")]
    ReplayDiverged { step: usize },
    #[error("label derivation failed: {0}")]
    Label(#[from] crate::action::ActionError),
    #[error("checkpoint network does not fit this dataset/config (expected input {expected}, checkpoint has {got})")]
    CheckpointShape { expected: usize, got: usize },
}

/// Per-dimension standardizer with the std floored at 1e-6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fit over `n` rows of width `dim`, stored flat.
    pub fn fit(data: &[f64], dim: usize) -> Self {
        let n = data.len() / dim;
        assert!(n > 0);
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var.iter().map(|v| (v / n as f64).sqrt().max(1e-6)).collect();
        Normalizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize_in_place(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
    }

    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        let mut v = row.to_vec();
        self.normalize_in_place(&mut v);
        v
    }

    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| x * s + m).collect()
    }
}

/// Training hyperparameters. `max_steps` caps the number of Adam updates
/// (for fine-tuning budgets); `None` runs the full epoch count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub action_space: ActionSpaceKind,
    pub obs_config: ObservationConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub max_steps: Option<usize>,
}

impl TrainConfig {
    pub fn new(action_space: ActionSpaceKind, obs_config: ObservationConfig, seed: u64) -> Self {
        TrainConfig {
            action_space,
            obs_config,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 4,
            seed,
            max_steps: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.learning_rate <= 0.0 {
            return Err("learning_rate must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        Ok(())
    }
}

/// Flat supervised dataset derived from episode replay.
#[derive(Debug, Clone)]
pub struct Samples {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub input_dim: usize,
    pub target_dim: usize,
    pub n: usize,
}

/// Replay every episode through the simulator, rendering observations and
/// deriving action labels in the configured space. The pixel dither and any
/// state noise draw from per-episode streams of `cfg.seed`.
pub fn build_samples(dataset: &Dataset, cfg: &TrainConfig) -> Result<Samples, TrainError> {
    let arm = dataset.arm().clone();
    let dof = arm.dof();
    let input_dim = cfg.obs_config.obs_len(dof);
    let target_dim = cfg.action_space.motion_len(dof) + 1;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut n = 0;

    for (idx, ep) in dataset.episodes.iter().enumerate() {
        let mut rng = stream(cfg.seed, STREAM_DITHER_BASE + idx as u64);
        let mut world = WorldState::init(ep.task.clone())?;
        for t in 0..ep.steps.len() - 1 {
            // guard: the replayed world must sit exactly on the recording
            let dq: f64 = world
                .joints
                .angles
                .iter()
                .zip(&ep.steps[t].joints.angles)
                .map(|(a, b)| (a - b).abs())
                .sum();
            if dq > 1e-9 {
                return Err(TrainError::ReplayDiverged { step: t });
            }

            let obs = observe(&world, &cfg.obs_config, Some(&mut rng));
            let mut row = obs.flat();
            if PIXEL_DITHER > 0.0 {
                for px in row.iter_mut().take(obs.pixels.len()) {
                    *px += rng.gen_range(-PIXEL_DITHER..=PIXEL_DITHER);
                }
            }
            debug_assert_eq!(row.len(), input_dim);
            inputs.extend_from_slice(&row);

            let next = &ep.steps[t + 1];
            let label =
                encode_action(cfg.action_space, &arm, &world.joints, &next.joints, next.gripper)?;
            targets.extend_from_slice(&label.motion);
            targets.push(label.gripper);
            n += 1;

            // drive the simulator to the next recorded state so grasp and
            // release flags evolve exactly as they did during collection
            let drive = Action::new(
                ActionSpaceKind::AbsoluteJoint,
                next.joints.angles.clone(),
                next.gripper,
            );
            world = step(&world, &drive).world;
        }
    }
    Ok(Samples { inputs, targets, input_dim, target_dim, n })
}

/// A trained policy: network plus the normalizers and the configuration it
/// was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: PolicyNet,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
    pub action_space: ActionSpaceKind,
    pub obs_config: ObservationConfig,
    pub dof: usize,
    pub loss_curve: Vec<f64>,
}

impl Model {
    /// Map a raw observation to an executable action.
    pub fn act(&self, obs_flat: &[f64]) -> Result<Action, NetError> {
        let x = self.input_norm.normalize(obs_flat);
        let y = self.net.forward(&x)?;
        let out = self.target_norm.denormalize(&y);
        let (motion, grip) = out.split_at(out.len() - 1);
        Ok(Action::new(self.action_space, motion.to_vec(), grip[0]))
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - Self::BETA1.powi(self.t as i32);
        let b2t = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Behavior-clone a fresh policy on `dataset`.
pub fn train_bc(dataset: &Dataset, cfg: &TrainConfig) -> Result<Model, TrainError> {
    train_bc_from(dataset, cfg, None)
}

/// As [`train_bc`], optionally starting from a checkpoint's weights
/// (fine-tuning). The epoch counter and optimizer state start fresh; the
/// checkpoint must have been trained with the same sensors and action space.
pub fn train_bc_from(
    dataset: &Dataset,
    cfg: &TrainConfig,
    checkpoint: Option<&Model>,
) -> Result<Model, TrainError> {
    cfg.validate().expect("invalid train config");
    let samples = build_samples(dataset, cfg)?;
    let mut input_norm = Normalizer::fit(&samples.inputs, samples.input_dim);
    for s in &mut input_norm.std {
        *s = s.max(INPUT_STD_FLOOR);
    }
    let target_norm = Normalizer::fit(&samples.targets, samples.target_dim);

    let mut inputs = samples.inputs;
    for row in inputs.chunks_exact_mut(samples.input_dim) {
        input_norm.normalize_in_place(row);
    }
    let mut targets = samples.targets;
    for row in targets.chunks_exact_mut(samples.target_dim) {
        target_norm.normalize_in_place(row);
    }

    let layer_sizes: Vec<usize> = std::iter::once(samples.input_dim)
        .chain(HIDDEN_SIZES)
        .chain(std::iter::once(samples.target_dim))
        .collect();
    let mut net = match checkpoint {
        Some(m) => {
            if m.net.layer_sizes != layer_sizes {
                return Err(TrainError::CheckpointShape {
                    expected: samples.input_dim,
                    got: m.net.input_len(),
                });
            }
            m.net.clone()
        }
        None => PolicyNet::init(&layer_sizes, &mut stream(cfg.seed, STREAM_INIT)),
    };

    let mut params = net.params_flat();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..samples.n).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut updates = 0usize;

    'epochs: for _ in 0..cfg.epochs {
        // Fisher-Yates from the shuffle stream
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        let mut batch_in = Vec::with_capacity(cfg.batch_size * samples.input_dim);
        let mut batch_tg = Vec::with_capacity(cfg.batch_size * samples.target_dim);
        for chunk in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|cap| updates >= cap) {
                if epoch_batches > 0 {
                    loss_curve.push(epoch_loss / epoch_batches as f64);
                }
                break 'epochs;
            }
            batch_in.clear();
            batch_tg.clear();
            for &s in chunk {
                batch_in
                    .extend_from_slice(&inputs[s * samples.input_dim..(s + 1) * samples.input_dim]);
                batch_tg.extend_from_slice(
                    &targets[s * samples.target_dim..(s + 1) * samples.target_dim],
                );
            }
            net.set_params_flat(&params);
            let (loss, grad) = net.loss_and_grad(&batch_in, &batch_tg, chunk.len())?;
            adam.update(&mut params, &grad.flat());
            epoch_loss += loss;
            epoch_batches += 1;
            updates += 1;
        }
        loss_curve.push(epoch_loss / epoch_batches as f64);
    }
    net.set_params_flat(&params);

    Ok(Model {
        net,
        input_norm,
        target_norm,
        action_space: cfg.action_space,
        obs_config: cfg.obs_config.clone(),
        dof: dataset.arm().dof(),
        loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::record_dataset;
    use crate::sensing::{CameraPreset, StateMode};
    use crate::sim::TaskDistribution;

    fn small_dataset() -> Dataset {
        record_dataset(&TaskDistribution::training_default(21), 8, 21).unwrap()
    }

    fn small_cfg(seed: u64) -> TrainConfig {
        let obs = ObservationConfig::new(CameraPreset::DualWideOnly, StateMode::None);
        let mut cfg = TrainConfig::new(ActionSpaceKind::RelativeEEF, obs, seed);
        cfg.epochs = 2;
        cfg
    }

    #[test]
    fn normalizer_inverse_recovers_raw_values() {
        let data: Vec<f64> = (0..300).map(|i| ((i * 37) % 17) as f64 * 0.31 - 2.0).collect();
        let norm = Normalizer::fit(&data, 3);
        for row in data.chunks_exact(3) {
            let back = norm.denormalize(&norm.normalize(row));
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_dimension_gets_floored_std() {
        let data = vec![0.5, 1.0, 0.5, 2.0, 0.5, 3.0];
        let norm = Normalizer::fit(&data, 2);
        assert_eq!(norm.std[0], 1e-6);
        // normalizing a training value still lands on zero, not infinity
        assert_eq!(norm.normalize(&[0.5, 2.0])[0], 0.0);
    }

    #[test]
    fn state_free_input_has_exactly_pixel_length() {
        let ds = small_dataset();
        let cfg = small_cfg(1);
        let samples = build_samples(&ds, &cfg).unwrap();
        assert_eq!(samples.input_dim, cfg.obs_config.pixel_len());
        assert_eq!(samples.n, ds.total_steps() - ds.episodes.len());
    }

    #[test]
    fn state_input_appends_state_dims() {
        let ds = small_dataset();
        let mut cfg = small_cfg(1);
        cfg.obs_config = ObservationConfig::new(CameraPreset::DualWideOnly, StateMode::EEFPose);
        let samples = build_samples(&ds, &cfg).unwrap();
        assert_eq!(samples.input_dim, cfg.obs_config.pixel_len() + 3);
    }

    #[test]
    fn zero_epochs_returns_initialized_net() {
        let ds = small_dataset();
        let mut cfg = small_cfg(2);
        cfg.epochs = 0;
        let model = train_bc(&ds, &cfg).unwrap();
        assert!(model.loss_curve.is_empty());
        let fresh = PolicyNet::init(
            &model.net.layer_sizes,
            &mut stream(2, STREAM_INIT),
        );
        assert_eq!(model.net, fresh);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let ds = small_dataset();
        let cfg = small_cfg(3);
        let a = train_bc(&ds, &cfg).unwrap();
        let b = train_bc(&ds, &cfg).unwrap();
        assert_eq!(a.net, b.net, "same seed must give bit-identical weights");
        assert!(a.loss_curve.last().unwrap() < a.loss_curve.first().unwrap());
    }

    #[test]
    fn different_seed_different_weights() {
        let ds = small_dataset();
        let a = train_bc(&ds, &small_cfg(4)).unwrap();
        let b = train_bc(&ds, &small_cfg(5)).unwrap();
        assert_ne!(a.net, b.net);
    }

    #[test]
    fn max_steps_caps_updates() {
        let ds = small_dataset();
        let mut cfg = small_cfg(6);
        cfg.epochs = 50;
        cfg.max_steps = Some(3);
        let model = train_bc(&ds, &cfg).unwrap();
        assert_eq!(model.loss_curve.len(), 1, "stopped inside the first epoch");
    }

    #[test]
    fn finetune_starts_from_checkpoint() {
        let ds = small_dataset();
        let cfg = small_cfg(7);
        let base = train_bc(&ds, &cfg).unwrap();
        let mut ft_cfg = cfg.clone();
        ft_cfg.max_steps = Some(0);
        ft_cfg.epochs = 1;
        // a zero-step fine-tune is exactly the checkpoint
        let same = train_bc_from(&ds, &ft_cfg, Some(&base)).unwrap();
        assert_eq!(same.net, base.net);
        // a real fine-tune moves the weights but keeps the shape
        ft_cfg.max_steps = Some(2);
        let moved = train_bc_from(&ds, &ft_cfg, Some(&base)).unwrap();
        assert_ne!(moved.net, base.net);
        assert_eq!(moved.net.layer_sizes, base.net.layer_sizes);
    }

    #[test]
    fn model_act_round_trips_normalization() {
        let ds = small_dataset();
        let model = train_bc(&ds, &small_cfg(8)).unwrap();
        let world = WorldState::init(ds.episodes[0].task.clone()).unwrap();
        let obs = observe(&world, &model.obs_config, None);
        let action = model.act(&obs.flat()).unwrap();
        assert_eq!(action.kind, ActionSpaceKind::RelativeEEF);
        assert_eq!(action.motion.len(), 3);
        assert!(action.motion.iter().all(|m| m.is_finite()));
    }
}
