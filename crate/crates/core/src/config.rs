//! Key-value configuration file.
//!
//! Keys mirror [`TrainConfig`] plus data paths; every key is optional.
//!
//! ```toml
//! data_dir = "data/ml-100k"
//! out_dir = "out"
//! epochs = 5
//! epsilon = 0.4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttentionActivation, TrainConfig};

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "PRIVREC_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub split_ratio: Option<f64>,
    pub dim: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub gamma: Option<f64>,
    pub use_feature_perturbation: Option<bool>,
    pub use_loss_perturbation: Option<bool>,
    pub epsilon: Option<f64>,
    pub epsilon_local: Option<f64>,
    pub seed: Option<u64>,
    pub init_std: Option<f64>,
    pub neighbor_cap: Option<usize>,
    pub activation: Option<AttentionActivation>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Overwrites the fields of `config` that this file sets.
    pub fn apply(&self, config: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    config.$f = v;
                }
            )*};
        }
        set!(
            dim,
            lr,
            batch_size,
            epochs,
            gamma,
            use_feature_perturbation,
            use_loss_perturbation,
            epsilon,
            epsilon_local,
            seed,
            init_std,
            neighbor_cap,
            activation
        );
    }
}
