//! Metric reports: the JSON/CSV surface of a run.
//!
//! Rates are stored as fractions in [0, 1]; rendering to percent is a
//! display concern. Not-applicable values serialize as `null` in JSON
//! and `NA` in CSV.

use serde::{Deserialize, Serialize};

use crate::metrics::{ConfusionCounts, ConfusionScores};

/// The full metric set of one evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ber: Option<f64>,
    pub wer: Option<f64>,
    pub ser: Option<f64>,
    pub ser_reduction: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub detection_probability: Option<f64>,
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
    #[serde(rename = "TN")]
    pub tn: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
    pub n_bits: u64,
    pub n_words: u64,
    pub n_sentences: u64,
}

impl MetricsReport {
    pub fn with_confusion(mut self, counts: &ConfusionCounts, scores: &ConfusionScores) -> Self {
        self.tp = counts.tp;
        self.fp = counts.fp;
        self.tn = counts.tn;
        self.fn_ = counts.fn_;
        self.accuracy = scores.accuracy;
        self.precision = scores.precision;
        self.recall = scores.recall;
        self.f1 = scores.f1;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn csv_header() -> &'static str {
        "ber,wer,ser,ser_reduction,accuracy,precision,recall,f1,detection_probability,\
         TP,FP,TN,FN,n_bits,n_words,n_sentences"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            na(self.ber),
            na(self.wer),
            na(self.ser),
            na(self.ser_reduction),
            na(self.accuracy),
            na(self.precision),
            na(self.recall),
            na(self.f1),
            na(self.detection_probability),
            self.tp,
            self.fp,
            self.tn,
            self.fn_,
            self.n_bits,
            self.n_words,
            self.n_sentences
        )
    }
}

/// CSV cell for an optional fraction.
pub fn na(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}
