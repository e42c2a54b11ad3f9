//! Cross-embodiment adaptation: policies trained on the default arm are
//! fine-tuned onto a second arm (longer links, shifted base) with a small
//! demonstration budget, then evaluated in-domain on the new arm.
//!
//! The state-based side uses joint-angle state: joint trajectories do not
//! transfer across link lengths, which is exactly the state-space mismatch
//! that makes cross-embodiment adaptation expensive for state-based
//! policies. The state-free side only has to absorb the small image shift
//! from the new arm's geometry.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::evalsuite::grid::{CellSpec, DatasetPreset, ExperimentContext, GridError};
use crate::evalsuite::{run_protocol_with, ModelPolicy, Protocol};
use crate::learner::train::train_bc_from;
use crate::sensing::StateMode;
use crate::sim::arm_b;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XEmbodyRow {
    pub state_mode: String,
    pub finetune_steps: usize,
    pub successes: u32,
    pub trials: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XEmbodyReport {
    pub n_demos: u32,
    pub rows: Vec<XEmbodyRow>,
}

impl XEmbodyReport {
    pub fn score(&self, state_mode: StateMode, steps: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.state_mode == state_mode.label() && r.finetune_steps == steps)
            .map(|r| r.score)
    }
}

/// Source-arm training cell for one state mode.
pub fn source_cell(state_mode: StateMode) -> CellSpec {
    CellSpec {
        label: format!("xembody-src-{}", state_mode.label()),
        state_mode,
        ..CellSpec::default_state_free()
    }
}

/// Run the full study: train both checkpoints on the default arm, record
/// `n_demos` demonstrations on the second arm, fine-tune each checkpoint
/// for every step budget (0 = zero-shot), and score them in-domain on the
/// new arm.
pub fn run_cross_embodiment(
    ctx: &mut ExperimentContext,
    n_demos: u32,
    finetune_steps: &[usize],
    seed: u64,
    trials: u32,
) -> Result<XEmbodyReport, GridError> {
    let arm = arm_b();
    let mut rows = Vec::new();
    for state_mode in [StateMode::None, StateMode::Joints] {
        let src = source_cell(state_mode);
        let checkpoint = ctx.model(&src, seed)?;
        let demos = ctx.dataset(DatasetPreset::Standard, n_demos, Some(&arm))?;
        for &steps in finetune_steps {
            let model = if steps == 0 {
                checkpoint.clone()
            } else {
                let mut cfg = src.train_config(seed);
                cfg.max_steps = Some(steps);
                cfg.epochs = usize::MAX; // the step cap terminates training
                Arc::new(train_bc_from(&demos, &cfg, Some(&checkpoint))?)
            };
            let protocol = Protocol::in_domain().with_trials(trials);
            let mut policy = ModelPolicy::new(&model);
            let rep = run_protocol_with(
                &mut policy,
                &protocol,
                seed,
                Some(&arm),
                format!("xembody-{}-{}", state_mode.label(), steps),
            );
            rows.push(XEmbodyRow {
                state_mode: state_mode.label().into(),
                finetune_steps: steps,
                successes: rep.total_successes(),
                trials: rep.total_trials(),
                score: rep.score,
            });
        }
    }
    Ok(XEmbodyReport { n_demos, rows })
}
