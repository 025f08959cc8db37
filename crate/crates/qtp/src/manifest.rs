//! Run manifests: the single reproducibility envelope of every run.
//!
//! A manifest pins the seed, the channel, the transport mode, and every
//! file the run touches. Runs write their resolved manifest before any
//! output; transcripts reference its hash, and replaying the same
//! manifest reproduces every artifact bit-exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::TransmitMode;
use crate::error::{ConfigError, QtpError};
use crate::model::ModelSettings;
use crate::quantum::ChannelConfig;
use crate::trainer::TrainConfig;

pub const KNOWN_METRICS: [&str; 5] = ["ber", "wer", "ser", "ser_reduction", "detection"];

fn default_true() -> bool {
    true
}
fn default_max_unit() -> usize {
    16
}
fn default_replicates() -> usize {
    10
}
fn default_threshold() -> f64 {
    0.5
}
fn default_metrics() -> Vec<String> {
    KNOWN_METRICS.iter().map(|s| s.to_string()).collect()
}

/// Everything a run needs, in one plain-text document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub mode: TransmitMode,
    pub corpus: PathBuf,
    pub channel: ChannelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<PathBuf>,
    /// Run the trained model after word repair. Defaults to whether a
    /// checkpoint is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_decode: Option<bool>,
    #[serde(default = "default_true")]
    pub segmentation: bool,
    #[serde(default = "default_max_unit")]
    pub max_unit: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_threshold")]
    pub confidence_threshold: f64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub train: TrainConfig,
    /// Filled with the generator identifier when the resolved manifest
    /// is written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_algorithm: Option<String>,
}

impl RunManifest {
    pub fn new(seed: u64, mode: TransmitMode, corpus: PathBuf, channel: ChannelConfig) -> Self {
        Self {
            seed,
            mode,
            corpus,
            channel,
            checkpoint: None,
            dictionary: None,
            post_decode: None,
            segmentation: true,
            max_unit: default_max_unit(),
            replicates: default_replicates(),
            confidence_threshold: default_threshold(),
            metrics: default_metrics(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            rng_algorithm: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, QtpError> {
        let text = std::fs::read_to_string(path).map_err(|e| QtpError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let manifest: RunManifest =
            toml::from_str(&text).map_err(|e| ConfigError::Unparseable {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        Ok(manifest)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    /// Write the resolved manifest (with the RNG identifier pinned) and
    /// return its content hash.
    pub fn write_resolved(&self, path: &Path) -> Result<String, QtpError> {
        let mut resolved = self.clone();
        resolved.rng_algorithm = Some(crate::rng::RNG_ALGORITHM.to_string());
        let text = resolved.to_toml();
        std::fs::write(path, &text).map_err(|e| QtpError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(hash_hex(text.as_bytes()))
    }

    pub fn post_decode_enabled(&self) -> bool {
        self.post_decode.unwrap_or(self.checkpoint.is_some())
    }

    /// Check that every referenced file exists and parses, and that the
    /// field values are self-consistent. Runs refuse to start otherwise.
    pub fn validate(&self) -> Result<(), QtpError> {
        if !self.corpus.exists() {
            return Err(ConfigError::MissingFile {
                path: self.corpus.clone(),
            }
            .into());
        }
        if crate::pipeline::load_corpus(&self.corpus)?.is_empty() {
            return Err(ConfigError::InvalidField {
                field: "corpus".into(),
                reason: format!("{} contains no sentences", self.corpus.display()),
            }
            .into());
        }
        self.channel.build().map_err(|e| ConfigError::InvalidField {
            field: "channel".into(),
            reason: e.to_string(),
        })?;
        crate::transmit::Link::resolve(&self.channel, self.mode)?;
        if let Some(dict) = &self.dictionary {
            if !dict.exists() {
                return Err(ConfigError::MissingFile { path: dict.clone() }.into());
            }
            crate::word_repair::Dictionary::load(dict).map_err(QtpError::from)?;
        }
        if self.post_decode_enabled() {
            match &self.checkpoint {
                None => return Err(ConfigError::MissingCheckpoint.into()),
                Some(path) => {
                    if !path.exists() {
                        return Err(ConfigError::MissingFile { path: path.clone() }.into());
                    }
                    crate::checkpoint::Checkpoint::load(path)?;
                }
            }
        }
        if self.max_unit < 5 {
            return Err(ConfigError::InvalidField {
                field: "max_unit".into(),
                reason: format!("{} below the minimum of 5", self.max_unit),
            }
            .into());
        }
        if self.replicates == 0 {
            return Err(ConfigError::InvalidField {
                field: "replicates".into(),
                reason: "must be at least 1".into(),
            }
            .into());
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(ConfigError::InvalidField {
                field: "confidence_threshold".into(),
                reason: format!("{} outside [0, 1]", self.confidence_threshold),
            }
            .into());
        }
        for m in &self.metrics {
            if !KNOWN_METRICS.contains(&m.as_str()) {
                return Err(ConfigError::InvalidField {
                    field: "metrics".into(),
                    reason: format!("unknown metric {m:?}"),
                }
                .into());
            }
        }
        self.train.validate().map_err(QtpError::from)?;
        Ok(())
    }
}

pub fn hash_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::ChannelKind;

    fn write(path: &Path, content: &str) {
        std::fs::write(path, content).unwrap();
    }

    #[test]
    fn toml_roundtrip() {
        let manifest = RunManifest::new(
            42,
            TransmitMode::Qubit,
            PathBuf::from("corpus.txt"),
            ChannelConfig::new(ChannelKind::BitFlip, 0.01, 2),
        );
        let text = manifest.to_toml();
        let back: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.mode, TransmitMode::Qubit);
        assert_eq!(back.channel.kind, "bit_flip");
        assert_eq!(back.max_unit, 16);
        assert_eq!(back.replicates, 10);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let text = r#"
seed = 7
mode = "qudit4"
corpus = "c.txt"

[channel]
kind = "bit_flip"
lambda = 0.01
d = 2
"#;
        let manifest: RunManifest = toml::from_str(text).unwrap();
        assert!(manifest.segmentation);
        assert_eq!(manifest.confidence_threshold, 0.5);
        assert_eq!(manifest.train.theta, 0.5);
        assert!(!manifest.post_decode_enabled());
    }

    #[test]
    fn validation_requires_existing_corpus() {
        let manifest = RunManifest::new(
            1,
            TransmitMode::Classical,
            PathBuf::from("/nonexistent/corpus.txt"),
            ChannelConfig::new(ChannelKind::BitFlip, 0.0, 2),
        );
        assert!(matches!(
            manifest.validate(),
            Err(QtpError::Config(ConfigError::MissingFile { .. }))
        ));
    }

    #[test]
    fn validation_checks_post_decode_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.txt");
        write(&corpus, "the cat sat here now\n");
        let mut manifest = RunManifest::new(
            1,
            TransmitMode::Qubit,
            corpus,
            ChannelConfig::new(ChannelKind::BitFlip, 0.01, 2),
        );
        manifest.post_decode = Some(true);
        assert!(matches!(
            manifest.validate(),
            Err(QtpError::Config(ConfigError::MissingCheckpoint))
        ));
        manifest.post_decode = Some(false);
        manifest.validate().unwrap();
    }

    #[test]
    fn resolved_manifest_hash_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(
            5,
            TransmitMode::Classical,
            PathBuf::from("x.txt"),
            ChannelConfig::new(ChannelKind::PhaseFlip, 0.25, 2),
        );
        let h1 = manifest.write_resolved(&dir.path().join("a.toml")).unwrap();
        let h2 = manifest.write_resolved(&dir.path().join("b.toml")).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
    }
}
