//! One joint training step: correction and evaluation forward passes
//! through the shared encoder, the combined loss, and its full backward
//! pass into a gradient accumulator.

use ndarray::Array2;

use super::losses::{evaluation_loss, focal_factor, focal_loss_dfactor, target_ids};
use super::TrainConfig;
use crate::error::QtpError;
use crate::model::{encoder_backward, encoder_forward, ModelConfig, ModelParams, CLS, SEP};
use crate::trainer::TrainingPair;

/// Token ids and labels of one pair, computed once per run.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    /// Word-repaired input, framed with [CLS]/[SEP].
    pub ids_w: Vec<usize>,
    /// Target word ids (unframed).
    pub target_ids: Vec<usize>,
    /// Per-word replacement labels.
    pub labels: Vec<bool>,
}

impl PreparedPair {
    pub fn from_pair(pair: &TrainingPair, config: &ModelConfig) -> Result<Self, QtpError> {
        let targets = target_ids(&pair.target, &config.vocab)?;
        let ids_w = config.frame(&config.tokenize(&pair.repaired))?;
        Ok(Self {
            ids_w,
            target_ids: targets,
            labels: pair.labels.clone(),
        })
    }

    pub fn word_count(&self) -> usize {
        self.target_ids.len()
    }
}

/// Loss components of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepLosses {
    pub combined: f64,
    pub correction: f64,
    pub evaluation: f64,
}

fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

fn argmax_row(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    let mut best_v = row[0];
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

struct ForwardState {
    logp: Array2<f64>,
    cache_c: crate::model::EncoderCache,
    hc: Array2<f64>,
    ids_c: Vec<usize>,
    cache_e: crate::model::EncoderCache,
    he: Array2<f64>,
    confidence: Vec<f64>,
    losses: StepLosses,
}

fn forward(
    prep: &PreparedPair,
    params: &ModelParams,
    config: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<ForwardState, QtpError> {
    let n = prep.word_count();

    // correction pass over the word-repaired tokens
    let x0c = crate::model::infer_embed(&prep.ids_w, params);
    let (hc, cache_c) = encoder_forward(&x0c, params, config)?;
    let logits = crate::model::infer_correction_logits(&hc, params);
    let logp = log_softmax_rows(&logits);
    let loss_c: f64 = prep
        .target_ids
        .iter()
        .enumerate()
        .map(|(i, &t)| -logp[[i + 1, t]])
        .sum();

    // the correction network's own words feed the evaluation pass
    let mut ids_c = Vec::with_capacity(n + 2);
    ids_c.push(CLS);
    for i in 1..=n {
        ids_c.push(argmax_row(logits.row(i)));
    }
    ids_c.push(SEP);

    let x0e = crate::model::infer_embed_pair(&prep.ids_w, &ids_c, params);
    let (he, cache_e) = encoder_forward(&x0e, params, config)?;
    let confidence = crate::model::infer_confidence(&he, params, n);
    let loss_e = evaluation_loss(
        &confidence,
        &prep.labels,
        tcfg.focal_alpha,
        tcfg.focal_gamma,
        tcfg.focal_epsilon,
    );

    let combined = super::losses::combined_loss(loss_c, loss_e, tcfg.theta);
    Ok(ForwardState {
        logp,
        cache_c,
        hc,
        ids_c,
        cache_e,
        he,
        confidence,
        losses: StepLosses {
            combined,
            correction: loss_c,
            evaluation: loss_e,
        },
    })
}

/// Combined loss only — the reference path for finite-difference checks.
pub fn joint_loss(
    prep: &PreparedPair,
    params: &ModelParams,
    config: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<StepLosses, QtpError> {
    Ok(forward(prep, params, config, tcfg)?.losses)
}

/// Forward and backward for one pair. Gradients are accumulated into
/// `grads`, which the caller is expected to have zeroed.
pub fn joint_step(
    prep: &PreparedPair,
    params: &ModelParams,
    config: &ModelConfig,
    tcfg: &TrainConfig,
    grads: &mut ModelParams,
) -> Result<StepLosses, QtpError> {
    let n = prep.word_count();
    let fwd = forward(prep, params, config, tcfg)?;

    // --- correction head backward: θ·(softmax − onehot) on word rows ---
    let mut dlogits = fwd.logp.mapv(f64::exp);
    for (i, mut row) in dlogits.rows_mut().into_iter().enumerate() {
        if i == 0 || i > n {
            row.fill(0.0);
        } else {
            row[prep.target_ids[i - 1]] -= 1.0;
            row.mapv_inplace(|v| v * tcfg.theta);
        }
    }
    grads.corr_w += &fwd.hc.t().dot(&dlogits);
    grads.corr_b += &dlogits
        .sum_axis(ndarray::Axis(0))
        .insert_axis(ndarray::Axis(0));
    let dhc = dlogits.dot(&params.corr_w.t());
    let dx0c = encoder_backward(&dhc, &fwd.cache_c, params, grads);
    for (i, &id) in prep.ids_w.iter().enumerate() {
        let mut row = grads.token_embed.row_mut(id);
        row += &dx0c.row(i);
        let mut pos = grads.pos_embed.row_mut(i);
        pos += &dx0c.row(i);
    }

    // --- evaluation head backward: focal loss through the sigmoid ---
    let mut du = Array2::zeros((fwd.he.nrows(), 1));
    for (i, (&c, &q)) in fwd.confidence.iter().zip(&prep.labels).enumerate() {
        let f = focal_factor(c, q);
        let df = focal_loss_dfactor(f, tcfg.focal_alpha, tcfg.focal_gamma, tcfg.focal_epsilon);
        let dc = if q { df } else { -df };
        du[[i + 1, 0]] = (1.0 - tcfg.theta) * dc * c * (1.0 - c);
    }
    grads.eval_w += &fwd.he.t().dot(&du);
    grads.eval_b[[0, 0]] += du.sum();
    let dhe = du.dot(&params.eval_w.t());
    let dx0e = encoder_backward(&dhe, &fwd.cache_e, params, grads);
    for (i, (&idw, &idc)) in prep.ids_w.iter().zip(&fwd.ids_c).enumerate() {
        let mut row_w = grads.token_embed.row_mut(idw);
        row_w += &dx0e.row(i);
        let mut row_c = grads.token_embed.row_mut(idc);
        row_c += &dx0e.row(i);
        let mut pos = grads.pos_embed.row_mut(i);
        pos += &dx0e.row(i);
    }

    Ok(fwd.losses)
}

/// Inference-style artifacts of one pair under current parameters, for
/// validation passes during experiments.
pub fn predict_confidence(
    prep: &PreparedPair,
    params: &ModelParams,
    config: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(Vec<usize>, Vec<f64>), QtpError> {
    let fwd = forward(prep, params, config, tcfg)?;
    Ok((fwd.ids_c[1..=prep.word_count()].to_vec(), fwd.confidence))
}
