//! Model files: a JSON header describing the network and its sensors,
//! followed by the raw parameters as little-endian 64-bit floats. Magic
//! `SFPM`, version u32, header length u32, header bytes, weights.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::action::ActionSpaceKind;
use crate::learner::net::PolicyNet;
use crate::learner::train::{Model, Normalizer};
use crate::sensing::ObservationConfig;

pub const MODEL_MAGIC: [u8; 4] = *b"SFPM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected SFPM, got {got:?}")]
    MagicMismatch { got: [u8; 4] },
    #[error("unsupported model version {got} (expected {MODEL_VERSION})")]
    VersionMismatch { got: u32 },
    #[error("model file truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("header parse error: {0}")]
    Header(#[from] serde_json::Error),
    #[error("model was trained with different sensors than requested")]
    ObsIncompatible,
    #[error("parameter block has {got} values, header implies {expected}")]
    ParamCount { expected: usize, got: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    layer_sizes: Vec<usize>,
    action_space: ActionSpaceKind,
    obs_config: ObservationConfig,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    target_mean: Vec<f64>,
    target_std: Vec<f64>,
    dof: usize,
    loss_curve: Vec<f64>,
}

/// Write the model to `path`.
pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelError> {
    let header = Header {
        layer_sizes: model.net.layer_sizes.clone(),
        action_space: model.action_space,
        obs_config: model.obs_config.clone(),
        input_mean: model.input_norm.mean.clone(),
        input_std: model.input_norm.std.clone(),
        target_mean: model.target_norm.mean.clone(),
        target_std: model.target_norm.std.clone(),
        dof: model.dof,
        loss_curve: model.loss_curve.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut buf = Vec::new();
    buf.extend_from_slice(&MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_bytes);
    for p in model.net.params_flat() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

fn read_exact(
    r: &mut impl Read,
    buf: &mut [u8],
    context: &'static str,
) -> Result<(), ModelError> {
    r.read_exact(buf).map_err(|_| ModelError::Truncated { context })
}

/// Load a model previously written by [`save_model`].
pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut f, &mut magic, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(ModelError::MagicMismatch { got: magic });
    }
    let mut u32buf = [0u8; 4];
    read_exact(&mut f, &mut u32buf, "version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != MODEL_VERSION {
        return Err(ModelError::VersionMismatch { got: version });
    }
    read_exact(&mut f, &mut u32buf, "header length")?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut f, &mut header_bytes, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut net = PolicyNet::zeros(&header.layer_sizes);
    let expected = net.param_count();
    let mut params = Vec::with_capacity(expected);
    let mut f64buf = [0u8; 8];
    for _ in 0..expected {
        read_exact(&mut f, &mut f64buf, "parameters")?;
        params.push(f64::from_le_bytes(f64buf));
    }
    // trailing bytes mean the header and the parameter block disagree
    if f.read(&mut [0u8; 1])? != 0 {
        return Err(ModelError::ParamCount { expected, got: expected + 1 });
    }
    net.set_params_flat(&params);

    Ok(Model {
        net,
        input_norm: Normalizer { mean: header.input_mean, std: header.input_std },
        target_norm: Normalizer { mean: header.target_mean, std: header.target_std },
        action_space: header.action_space,
        obs_config: header.obs_config,
        dof: header.dof,
        loss_curve: header.loss_curve,
    })
}

/// Check a loaded model against the sensors an evaluation wants to use.
pub fn require_compatible(model: &Model, wanted: &ObservationConfig) -> Result<(), ModelError> {
    if model.obs_config.compatible_with(wanted) {
        Ok(())
    } else {
        Err(ModelError::ObsIncompatible)
    }
}
