//! The sentence-level repair model: a from-scratch transformer encoder
//! shared by a correction head (per-position vocabulary distribution) and
//! an evaluation head (per-position confidence score).

mod encoder;
mod infer;
mod params;

pub use encoder::{
    attention_head, encoder_backward, encoder_block, encoder_forward, layer_norm, multi_head,
    softmax_rows, EncoderCache,
};
pub use infer::{
    correction_forward, decode_correction, detect_errors, evaluation_forward, fuse,
    ConfidenceVector, CorrectionOutput,
};
pub(crate) use infer::{
    confidence_from_hidden as infer_confidence, correction_logits as infer_correction_logits,
    embed as infer_embed, embed_pair as infer_embed_pair,
};
pub use params::{BlockParams, ModelParams};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::text::TextStage;
use crate::word_repair::Dictionary;

/// Special token ids, fixed at the head of every vocabulary.
pub const CLS: usize = 0;
pub const SEP: usize = 1;
pub const PAD: usize = 2;
pub const UNK: usize = 3;

pub const SPECIAL_TOKENS: [&str; 4] = ["[CLS]", "[SEP]", "[PAD]", "[UNK]"];

/// Token inventory: the four special tokens followed by the sorted
/// lexical words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I, S>(words: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut lexical: Vec<String> = words.into_iter().map(Into::into).collect();
        lexical.sort();
        lexical.dedup();
        if let Some(w) = lexical.iter().find(|w| SPECIAL_TOKENS.contains(&w.as_str())) {
            return Err(ModelError::InvalidConfig {
                reason: format!("word {w:?} collides with a special token"),
            });
        }
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(lexical);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self { tokens, index })
    }

    pub fn from_dictionary(dict: &Dictionary) -> Self {
        Self::new(dict.words().map(str::to_string)).expect("dictionary words are plain ASCII")
    }

    /// Rebuild from a checkpointed token list (specials included).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, ModelError> {
        for (i, t) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*t) {
                return Err(ModelError::InvalidConfig {
                    reason: format!("token {i} must be {t}"),
                });
            }
        }
        if tokens[SPECIAL_TOKENS.len()..]
            .iter()
            .any(|w| SPECIAL_TOKENS.contains(&w.as_str()))
        {
            return Err(ModelError::InvalidConfig {
                reason: "duplicated special token".into(),
            });
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIAL_TOKENS.len()
    }
}

/// Architecture knobs plus the vocabulary.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub num_blocks: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub vocab: Vocab,
}

/// Desk-scale architecture defaults. The block count is a knob; the
/// full-size twelve-block stack stays reachable through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub num_blocks: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            num_blocks: 2,
            d_model: 64,
            heads: 4,
            ffn_dim: 256,
            max_len: 64,
        }
    }
}

impl ModelConfig {
    pub fn new(vocab: Vocab) -> Self {
        Self::with_settings(vocab, ModelSettings::default())
    }

    pub fn with_settings(vocab: Vocab, s: ModelSettings) -> Self {
        Self {
            num_blocks: s.num_blocks,
            d_model: s.d_model,
            heads: s.heads,
            ffn_dim: s.ffn_dim,
            max_len: s.max_len,
            vocab,
        }
    }

    pub fn settings(&self) -> ModelSettings {
        ModelSettings {
            num_blocks: self.num_blocks,
            d_model: self.d_model,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
            max_len: self.max_len,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(ModelError::InvalidConfig {
                reason: format!(
                    "d_model {} must be a positive multiple of heads {}",
                    self.d_model, self.heads
                ),
            });
        }
        if self.max_len < 3 {
            return Err(ModelError::InvalidConfig {
                reason: "max_len must fit [CLS], one word, and [SEP]".into(),
            });
        }
        if self.vocab.len() <= SPECIAL_TOKENS.len() {
            return Err(ModelError::InvalidConfig {
                reason: "vocabulary has no lexical words".into(),
            });
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Word cores mapped to token ids, out-of-vocabulary words to [UNK].
    pub fn tokenize(&self, text: &TextStage) -> Vec<usize> {
        text.cores()
            .iter()
            .map(|core| self.vocab.id_or_unk(core))
            .collect()
    }

    /// Wrap word token ids with [CLS] … [SEP], enforcing the length cap.
    pub fn frame(&self, word_ids: &[usize]) -> Result<Vec<usize>, ModelError> {
        if word_ids.len() + 2 > self.max_len {
            return Err(ModelError::SentenceTooLong {
                words: word_ids.len(),
                max_len: self.max_len,
            });
        }
        let mut ids = Vec::with_capacity(word_ids.len() + 2);
        ids.push(CLS);
        ids.extend_from_slice(word_ids);
        ids.push(SEP);
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Stage;

    #[test]
    fn vocab_places_specials_first() {
        let v = Vocab::new(["cat", "dog", "ant"]).unwrap();
        assert_eq!(v.token(CLS), "[CLS]");
        assert_eq!(v.token(UNK), "[UNK]");
        assert_eq!(v.token(4), "ant");
        assert_eq!(v.id("dog"), Some(6));
        assert!(Vocab::is_special(PAD));
        assert!(!Vocab::is_special(4));
    }

    #[test]
    fn vocab_rejects_special_collision() {
        assert!(Vocab::new(["[PAD]"]).is_err());
    }

    #[test]
    fn tokenize_maps_oov_to_unk() {
        let v = Vocab::new(["cat", "sat"]).unwrap();
        let cfg = ModelConfig::new(v);
        let t = TextStage::parse(Stage::WordRepaired, "The cat zzz.");
        // "the" is out of vocab here, "zzz" too
        assert_eq!(cfg.tokenize(&t), vec![UNK, cfg.vocab.id("cat").unwrap(), UNK]);
    }

    #[test]
    fn frame_enforces_length() {
        let v = Vocab::new(["a"]).unwrap();
        let mut cfg = ModelConfig::new(v);
        cfg.max_len = 4;
        assert_eq!(cfg.frame(&[4, 4]).unwrap(), vec![CLS, 4, 4, SEP]);
        assert!(cfg.frame(&[4, 4, 4]).is_err());
    }
}
