//! Bit, word, and sentence error rates, plus confusion-matrix scores for
//! error detection.
//!
//! Scores whose denominator is empty are reported as not-applicable
//! (`None`), never silently coerced to 0.

use std::collections::BTreeSet;

use crate::bits::BitString;
use crate::error::MetricsError;
use crate::text::TextStage;

/// Fraction of differing bit positions.
pub fn ber(sent: &BitString, received: &BitString) -> Result<f64, MetricsError> {
    if sent.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let diff = sent
        .diff_count(received)
        .ok_or(MetricsError::LengthMismatch {
            left: sent.len(),
            right: received.len(),
        })?;
    Ok(diff as f64 / sent.len() as f64)
}

/// Fraction of positions whose surface words differ (case-sensitive).
/// The pipeline preserves word counts, so no alignment search is needed.
pub fn wer(reference: &TextStage, hypothesis: &TextStage) -> Result<f64, MetricsError> {
    if reference.word_count() != hypothesis.word_count() {
        return Err(MetricsError::LengthMismatch {
            left: reference.word_count(),
            right: hypothesis.word_count(),
        });
    }
    if reference.word_count() == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let wrong = reference
        .words()
        .iter()
        .zip(hypothesis.words())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / reference.word_count() as f64)
}

/// Fraction of sentence pairs with at least one word mismatch.
pub fn ser(references: &[TextStage], hypotheses: &[TextStage]) -> Result<f64, MetricsError> {
    if references.len() != hypotheses.len() {
        return Err(MetricsError::LengthMismatch {
            left: references.len(),
            right: hypotheses.len(),
        });
    }
    if references.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut wrong = 0usize;
    for (r, h) in references.iter().zip(hypotheses) {
        if r.word_count() != h.word_count() {
            return Err(MetricsError::LengthMismatch {
                left: r.word_count(),
                right: h.word_count(),
            });
        }
        if r.words() != h.words() {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / references.len() as f64)
}

/// Relative decrease of the sentence error rate:
/// (before − after) / before. Not applicable when `before` is 0.
pub fn ser_reduction_ratio(before: f64, after: f64) -> Option<f64> {
    if before > 0.0 {
        Some((before - after) / before)
    } else {
        None
    }
}

/// Raw confusion counts over detection decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Per-position tally of flagged positions (1-indexed) against ground
/// truth labels.
pub fn tally_confusion(
    flagged: &BTreeSet<usize>,
    truth: &[bool],
) -> Result<ConfusionCounts, MetricsError> {
    if let Some(&p) = flagged.iter().find(|&&p| p == 0 || p > truth.len()) {
        return Err(MetricsError::PositionOutOfRange {
            position: p,
            len: truth.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (i, &is_error) in truth.iter().enumerate() {
        let hit = flagged.contains(&(i + 1));
        match (is_error, hit) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fn_ += 1,
            (false, true) => counts.fp += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(counts)
}

/// Accuracy, precision, recall, and F1. Each score is `None` when its
/// denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfusionScores {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn confusion_scores(c: &ConfusionCounts) -> ConfusionScores {
    let ratio = |num: u64, den: u64| {
        if den > 0 {
            Some(num as f64 / den as f64)
        } else {
            None
        }
    };
    let accuracy = ratio(c.tp + c.tn, c.total());
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ConfusionScores {
        accuracy,
        precision,
        recall,
        f1,
    }
}

/// Fraction of truly corrupted positions the detector localized:
/// TP / (TP + FN). Not applicable without positives.
pub fn detection_probability(flagged: &BTreeSet<usize>, truth: &[bool]) -> Option<f64> {
    let counts = tally_confusion(flagged, truth).ok()?;
    if counts.tp + counts.fn_ == 0 {
        None
    } else {
        Some(counts.tp as f64 / (counts.tp + counts.fn_) as f64)
    }
}
