//! Correction and evaluation heads, confidence fusion, and error
//! detection.

use std::collections::BTreeSet;

use ndarray::{Array2, Axis};

use super::encoder::{encoder_forward, softmax_rows};
use super::{ModelConfig, ModelParams, Vocab, SPECIAL_TOKENS};
use crate::error::ModelError;
use crate::text::{redecorate, Stage, TextStage};

/// Per-position probability rows over the vocabulary (one row per word;
/// the [CLS]/[SEP] rows are excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOutput {
    probs: Array2<f64>,
}

impl CorrectionOutput {
    const ROW_SUM_TOL: f64 = 1e-9;

    pub fn new(probs: Array2<f64>) -> Result<Self, ModelError> {
        for (i, row) in probs.rows().into_iter().enumerate() {
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(ModelError::ShapeMismatch {
                    op: "correction_output".into(),
                    detail: format!("row {i} has negative or non-finite entries"),
                });
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(ModelError::ShapeMismatch {
                    op: "correction_output".into(),
                    detail: format!("row {i} sums to {sum}"),
                });
            }
        }
        Ok(Self { probs })
    }

    pub fn word_count(&self) -> usize {
        self.probs.nrows()
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    /// Highest-probability token id per row; ties go to the lowest index.
    pub fn argmax_ids(&self) -> Vec<usize> {
        self.probs
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                let mut best_p = row[0];
                for (j, &p) in row.iter().enumerate().skip(1) {
                    if p > best_p {
                        best = j;
                        best_p = p;
                    }
                }
                best
            })
            .collect()
    }
}

/// Per-position confidence scores in [0, 1]. High scores favour the
/// correction network's word over the word-repaired one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    scores: Vec<f64>,
}

impl ConfidenceVector {
    pub fn new(scores: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(ModelError::ShapeMismatch {
                op: "confidence".into(),
                detail: format!("score {bad} outside [0, 1]"),
            });
        }
        Ok(Self { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Token + positional embeddings for a framed id sequence.
pub(crate) fn embed(ids: &[usize], params: &ModelParams) -> Array2<f64> {
    let d = params.token_embed.ncols();
    let mut x = Array2::zeros((ids.len(), d));
    for (i, &id) in ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row += &params.token_embed.row(id);
        row += &params.pos_embed.row(i);
    }
    x
}

/// Embeddings for the evaluation pass: the two framed sequences are
/// embedded and summed position-wise, plus positional embeddings.
pub(crate) fn embed_pair(ids_a: &[usize], ids_b: &[usize], params: &ModelParams) -> Array2<f64> {
    debug_assert_eq!(ids_a.len(), ids_b.len());
    let d = params.token_embed.ncols();
    let mut x = Array2::zeros((ids_a.len(), d));
    for (i, (&a, &b)) in ids_a.iter().zip(ids_b).enumerate() {
        let mut row = x.row_mut(i);
        row += &params.token_embed.row(a);
        row += &params.token_embed.row(b);
        row += &params.pos_embed.row(i);
    }
    x
}

/// Correction logits for all positions: hidden states projected to the
/// vocabulary with the special-token columns masked to −∞, so softmax
/// never proposes [CLS]/[SEP]/[PAD]/[UNK].
pub(crate) fn correction_logits(h: &Array2<f64>, params: &ModelParams) -> Array2<f64> {
    let mut logits = h.dot(&params.corr_w);
    logits += &params.corr_b.broadcast(logits.raw_dim()).unwrap();
    for col in 0..SPECIAL_TOKENS.len() {
        logits.column_mut(col).fill(f64::NEG_INFINITY);
    }
    logits
}

/// Run the correction network over a word-repaired text: tokenize, frame
/// with [CLS]/[SEP], encode, and project each word position onto the
/// vocabulary.
pub fn correction_forward(
    t_w: &TextStage,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<CorrectionOutput, ModelError> {
    let ids = config.frame(&config.tokenize(t_w))?;
    let x0 = embed(&ids, params);
    let (h, _) = encoder_forward(&x0, params, config)?;
    let probs = softmax_rows(&correction_logits(&h, params));
    let n = t_w.word_count();
    CorrectionOutput::new(probs.slice(ndarray::s![1..=n, ..]).to_owned())
}

/// Pick the highest-probability word per position. The surface form
/// inherits each received token's decorations and capitalization from
/// `template` (normally the word-repaired text).
pub fn decode_correction(
    out: &CorrectionOutput,
    vocab: &Vocab,
    template: &TextStage,
) -> Result<TextStage, ModelError> {
    if out.word_count() != template.word_count() {
        return Err(ModelError::LengthMismatch {
            left: out.word_count(),
            right: template.word_count(),
        });
    }
    let words = out
        .argmax_ids()
        .into_iter()
        .zip(template.words())
        .map(|(id, token)| redecorate(token, vocab.token(id)))
        .collect();
    Ok(template.with_words(Stage::Corrected, words))
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Per-position confidence head applied to word rows of hidden states.
pub(crate) fn confidence_from_hidden(
    h: &Array2<f64>,
    params: &ModelParams,
    n_words: usize,
) -> Vec<f64> {
    let u = h.dot(&params.eval_w) + params.eval_b[[0, 0]];
    u.index_axis(Axis(1), 0)
        .iter()
        .skip(1)
        .take(n_words)
        .map(|&v| sigmoid(v))
        .collect()
}

/// Run the evaluation network: the shared encoder over the word-repaired
/// tokens summed position-wise with the corrected text's embeddings,
/// then a per-position sigmoid head.
pub fn evaluation_forward(
    t_w: &TextStage,
    t_c: &TextStage,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<ConfidenceVector, ModelError> {
    if t_w.word_count() != t_c.word_count() {
        return Err(ModelError::LengthMismatch {
            left: t_w.word_count(),
            right: t_c.word_count(),
        });
    }
    let ids_w = config.frame(&config.tokenize(t_w))?;
    let ids_c = config.frame(&config.tokenize(t_c))?;
    let x0 = embed_pair(&ids_w, &ids_c, params);
    let (h, _) = encoder_forward(&x0, params, config)?;
    ConfidenceVector::new(confidence_from_hidden(&h, params, t_w.word_count()))
}

/// Fuse the word-repaired and corrected texts: positions whose confidence
/// reaches the threshold take the corrected word, the rest keep the
/// word-repaired one.
pub fn fuse(
    t_w: &TextStage,
    t_c: &TextStage,
    confidence: &ConfidenceVector,
    threshold: f64,
) -> Result<TextStage, ModelError> {
    if t_w.word_count() != t_c.word_count() {
        return Err(ModelError::LengthMismatch {
            left: t_w.word_count(),
            right: t_c.word_count(),
        });
    }
    if confidence.len() != t_w.word_count() {
        return Err(ModelError::LengthMismatch {
            left: confidence.len(),
            right: t_w.word_count(),
        });
    }
    let words = confidence
        .scores()
        .iter()
        .zip(t_w.words().iter().zip(t_c.words()))
        .map(|(&c, (w, cw))| if c >= threshold { cw.clone() } else { w.clone() })
        .collect();
    Ok(t_w.with_words(Stage::Fused, words))
}

/// Positions (1-indexed) the model asserts were corrupted: confidence at
/// or above the threshold.
pub fn detect_errors(confidence: &ConfidenceVector, threshold: f64) -> BTreeSet<usize> {
    confidence
        .scores()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= threshold)
        .map(|(i, _)| i + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, Vocab, UNK};
    use crate::rng::{SeedStreams, StreamPurpose};

    fn setup() -> (ModelConfig, ModelParams) {
        let vocab = Vocab::new(["cat", "dog", "sat", "the"]).unwrap();
        let mut cfg = ModelConfig::new(vocab);
        cfg.num_blocks = 2;
        cfg.d_model = 16;
        cfg.heads = 2;
        cfg.ffn_dim = 32;
        cfg.max_len = 16;
        let streams = SeedStreams::new(7);
        let params = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        (cfg, params)
    }

    #[test]
    fn correction_rows_are_distributions() {
        let (cfg, params) = setup();
        let t_w = TextStage::parse(Stage::WordRepaired, "the cat sat");
        let out = correction_forward(&t_w, &params, &cfg).unwrap();
        assert_eq!(out.word_count(), 3);
        for row in out.probs().rows() {
            let sum: f64 = row.sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn correction_never_proposes_special_tokens() {
        let (cfg, params) = setup();
        let t_w = TextStage::parse(Stage::WordRepaired, "qqq zzz the");
        let out = correction_forward(&t_w, &params, &cfg).unwrap();
        for id in out.argmax_ids() {
            assert!(!Vocab::is_special(id), "argmax chose special token {id}");
        }
        // masked columns carry exactly zero probability
        for row in out.probs().rows() {
            for col in 0..4 {
                assert_eq!(row[col], 0.0);
            }
        }
    }

    #[test]
    fn over_length_sentence_is_rejected() {
        let (mut cfg, _) = setup();
        cfg.max_len = 4;
        let t_w = TextStage::parse(Stage::WordRepaired, "the cat sat");
        let streams = SeedStreams::new(7);
        let params = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        assert!(matches!(
            correction_forward(&t_w, &params, &cfg),
            Err(ModelError::SentenceTooLong { .. })
        ));
    }

    #[test]
    fn decode_takes_argmax_with_low_index_ties() {
        let vocab = Vocab::new(["a", "b", "c"]).unwrap();
        // columns: [CLS] [SEP] [PAD] [UNK] a b c
        let probs = ndarray::array![
            [0.0, 0.0, 0.0, 0.0, 0.2, 0.5, 0.3],
            [0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.5],
        ];
        let out = CorrectionOutput::new(probs).unwrap();
        let template = TextStage::parse(Stage::WordRepaired, "x y");
        let t_c = decode_correction(&out, &vocab, &template).unwrap();
        assert_eq!(t_c.words(), &["b", "a"]);
        assert_eq!(t_c.stage(), Stage::Corrected);
    }

    #[test]
    fn decode_one_hot_rows() {
        let vocab = Vocab::new(["a", "b"]).unwrap();
        let probs = ndarray::array![[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]];
        let out = CorrectionOutput::new(probs).unwrap();
        let template = TextStage::parse(Stage::WordRepaired, "q");
        assert_eq!(
            decode_correction(&out, &vocab, &template).unwrap().words(),
            &["b"]
        );
    }

    #[test]
    fn evaluation_outputs_one_score_per_word_in_unit_interval() {
        let (cfg, params) = setup();
        let t_w = TextStage::parse(Stage::WordRepaired, "the cat sat");
        let t_c = TextStage::parse(Stage::Corrected, "the dog sat");
        let c = evaluation_forward(&t_w, &t_c, &params, &cfg).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.scores().iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn evaluation_rejects_length_mismatch() {
        let (cfg, params) = setup();
        let t_w = TextStage::parse(Stage::WordRepaired, "the cat sat");
        let t_c = TextStage::parse(Stage::Corrected, "the cat");
        assert!(evaluation_forward(&t_w, &t_c, &params, &cfg).is_err());
    }

    #[test]
    fn fuse_threshold_rule() {
        let t_w = TextStage::parse(Stage::WordRepaired, "a b");
        let t_c = TextStage::parse(Stage::Corrected, "x y");
        let c = ConfidenceVector::new(vec![0.9, 0.1]).unwrap();
        let fused = fuse(&t_w, &t_c, &c, 0.5).unwrap();
        assert_eq!(fused.words(), &["x", "b"]);

        let zeros = ConfidenceVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(fuse(&t_w, &t_c, &zeros, 0.5).unwrap().words(), t_w.words());
        let ones = ConfidenceVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(fuse(&t_w, &t_c, &ones, 0.5).unwrap().words(), t_c.words());
    }

    #[test]
    fn fuse_is_idempotent_and_fixed_on_equal_inputs() {
        let t_w = TextStage::parse(Stage::WordRepaired, "a b c");
        let c = ConfidenceVector::new(vec![0.9, 0.2, 0.6]).unwrap();
        let same = t_w.with_words(Stage::Corrected, t_w.words().to_vec());
        let fused = fuse(&t_w, &same, &c, 0.5).unwrap();
        assert_eq!(fused.words(), t_w.words());
    }

    #[test]
    fn detection_positions_are_one_indexed() {
        let c = ConfidenceVector::new(vec![0.9, 0.1, 0.7]).unwrap();
        let flagged = detect_errors(&c, 0.5);
        assert_eq!(flagged.into_iter().collect::<Vec<_>>(), vec![1, 3]);
        let none = detect_errors(&ConfidenceVector::new(vec![0.1, 0.2]).unwrap(), 0.5);
        assert!(none.is_empty());
        let all = detect_errors(&ConfidenceVector::new(vec![0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn unk_tokens_still_flow_through() {
        let (cfg, params) = setup();
        let t_w = TextStage::parse(Stage::WordRepaired, "zzz");
        assert_eq!(cfg.tokenize(&t_w), vec![UNK]);
        let out = correction_forward(&t_w, &params, &cfg).unwrap();
        assert_eq!(out.word_count(), 1);
    }
}
