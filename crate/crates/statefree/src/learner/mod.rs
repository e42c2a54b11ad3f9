//! Policy network, behavior-cloning trainer, and model files.

pub mod model;
pub mod net;
pub mod train;

pub use model::{load_model, require_compatible, save_model, ModelError};
pub use net::{gradient_check, NetError, PolicyNet};
pub use train::{
    build_samples, train_bc, train_bc_from, Model, Normalizer, TrainConfig, TrainError,
};
