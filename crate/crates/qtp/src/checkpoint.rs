//! Versioned model checkpoints.
//!
//! A checkpoint is a JSON container holding the architecture settings,
//! the vocabulary, every weight tensor (row-major decimal), the EMA
//! shadow, the master seed, and the training history. JSON's shortest
//! round-trip float encoding keeps reloads bit-exact.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, QtpError};
use crate::model::{ModelConfig, ModelParams, ModelSettings, Vocab};
use crate::trainer::EpochStats;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NamedTensor {
    fn from_array(name: &str, a: &Array2<f64>) -> Self {
        Self {
            name: name.to_string(),
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn to_array(&self) -> Result<Array2<f64>, ConfigError> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone()).map_err(|_| {
            ConfigError::Other(format!(
                "tensor {} has {} values for shape {}×{}",
                self.name,
                self.data.len(),
                self.rows,
                self.cols
            ))
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub rng_algorithm: String,
    pub seed: u64,
    pub model: ModelSettings,
    pub vocab: Vec<String>,
    pub tensors: Vec<NamedTensor>,
    pub ema: Vec<NamedTensor>,
    pub history: Vec<EpochStats>,
}

impl Checkpoint {
    pub fn new(
        seed: u64,
        config: &ModelConfig,
        params: &ModelParams,
        ema: &ModelParams,
        history: Vec<EpochStats>,
    ) -> Self {
        let pack = |p: &ModelParams| {
            p.named_tensors()
                .into_iter()
                .map(|(name, t)| NamedTensor::from_array(&name, t))
                .collect()
        };
        Self {
            version: CHECKPOINT_VERSION,
            rng_algorithm: crate::rng::RNG_ALGORITHM.to_string(),
            seed,
            model: config.settings(),
            vocab: config.vocab.tokens().to_vec(),
            tensors: pack(params),
            ema: pack(ema),
            history,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), QtpError> {
        let json = serde_json::to_string(self).expect("checkpoint serializes");
        std::fs::write(path, json).map_err(|e| QtpError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, QtpError> {
        let text = std::fs::read_to_string(path).map_err(|e| QtpError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| ConfigError::Unparseable {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ConfigError::Other(format!(
                "checkpoint version {} unsupported (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            ))
            .into());
        }
        Ok(ckpt)
    }

    /// Rebuild the runtime model: configuration, trained parameters, and
    /// the EMA shadow.
    pub fn restore(&self) -> Result<(ModelConfig, ModelParams, ModelParams), QtpError> {
        let vocab = Vocab::from_tokens(self.vocab.clone()).map_err(QtpError::from)?;
        let config = ModelConfig::with_settings(vocab, self.model);
        config.validate().map_err(QtpError::from)?;
        let params = unpack(&self.tensors, &config)?;
        let ema = unpack(&self.ema, &config)?;
        Ok((config, params, ema))
    }
}

fn unpack(tensors: &[NamedTensor], config: &ModelConfig) -> Result<ModelParams, QtpError> {
    use crate::rng::{SeedStreams, StreamPurpose};
    // shape template with the right tensor inventory
    let mut params = ModelParams::init(
        config,
        &mut SeedStreams::new(0).stream(StreamPurpose::WeightInit, 0),
    );
    let names: Vec<String> = params
        .named_tensors()
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    if names.len() != tensors.len() {
        return Err(ConfigError::Other(format!(
            "checkpoint has {} tensors, model needs {}",
            tensors.len(),
            names.len()
        ))
        .into());
    }
    for (slot, (expected, stored)) in params
        .tensors_mut()
        .into_iter()
        .zip(names.iter().zip(tensors))
    {
        if expected != &stored.name {
            return Err(ConfigError::Other(format!(
                "checkpoint tensor {:?} where {:?} was expected",
                stored.name, expected
            ))
            .into());
        }
        let loaded = stored.to_array()?;
        if loaded.raw_dim() != slot.raw_dim() {
            return Err(ConfigError::Other(format!(
                "tensor {} has shape {}×{}, expected {}×{}",
                stored.name,
                loaded.nrows(),
                loaded.ncols(),
                slot.nrows(),
                slot.ncols()
            ))
            .into());
        }
        *slot = loaded;
    }
    Ok(params)
}
