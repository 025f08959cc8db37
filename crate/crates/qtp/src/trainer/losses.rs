//! Correction and evaluation losses.

use crate::error::TrainError;
use crate::model::{CorrectionOutput, Vocab};
use crate::text::TextStage;

/// Negative log-likelihood of the target words under the correction
/// output: −Σᵢ log P(wᵢ | input).
pub fn correction_loss(
    out: &CorrectionOutput,
    target: &TextStage,
    vocab: &Vocab,
) -> Result<f64, TrainError> {
    if out.word_count() != target.word_count() {
        return Err(TrainError::LengthMismatch {
            left: out.word_count(),
            right: target.word_count(),
        });
    }
    let ids = target_ids(target, vocab)?;
    Ok(correction_loss_ids(out, &ids))
}

/// Vocabulary ids of a target text's word cores; out-of-vocabulary words
/// are a labeling error, not an [UNK] fallback.
pub fn target_ids(target: &TextStage, vocab: &Vocab) -> Result<Vec<usize>, TrainError> {
    target
        .cores()
        .iter()
        .map(|core| {
            vocab.id(core).ok_or_else(|| TrainError::TargetOutOfVocab {
                word: core.clone(),
            })
        })
        .collect()
}

pub(crate) fn correction_loss_ids(out: &CorrectionOutput, targets: &[usize]) -> f64 {
    targets
        .iter()
        .enumerate()
        .map(|(i, &t)| -out.probs()[[i, t]].ln())
        .sum()
}

/// Per-position focal factor: fᵢ = cᵢ where the word needs replacement,
/// 1 − cᵢ where it does not.
pub(crate) fn focal_factor(c: f64, needs_replacement: bool) -> f64 {
    if needs_replacement {
        c
    } else {
        1.0 - c
    }
}

/// Modified focal loss over confidence scores:
/// −Σᵢ α(1−fᵢ)^γ log(fᵢ + ε).
///
/// At γ = 0, α = 1, ε = 0 this reduces to binary cross-entropy on (c, q).
pub fn evaluation_loss(c: &[f64], q: &[bool], alpha: f64, gamma: f64, epsilon: f64) -> f64 {
    debug_assert_eq!(c.len(), q.len());
    c.iter()
        .zip(q)
        .map(|(&ci, &qi)| {
            let f = focal_factor(ci, qi);
            -alpha * (1.0 - f).powf(gamma) * (f + epsilon).ln()
        })
        .sum()
}

/// d(loss term)/df for one position of the focal loss.
pub(crate) fn focal_loss_dfactor(f: f64, alpha: f64, gamma: f64, epsilon: f64) -> f64 {
    // The γ = 0 power term would produce 0·∞ at f = 1; it vanishes exactly.
    let reweight = if gamma == 0.0 {
        0.0
    } else {
        alpha * gamma * (1.0 - f).powf(gamma - 1.0) * (f + epsilon).ln()
    };
    reweight - alpha * (1.0 - f).powf(gamma) / (f + epsilon)
}

/// θ·L_c + (1−θ)·L_e.
pub fn combined_loss(loss_c: f64, loss_e: f64, theta: f64) -> f64 {
    theta * loss_c + (1.0 - theta) * loss_e
}
