//! Joint training of the correction and evaluation heads: noisy-corpus
//! generation, the combined loss, per-pair gradient updates, and an
//! exponential moving average of the parameters.

mod adam;
mod joint;
mod losses;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use joint::{joint_loss, joint_step, predict_confidence, PreparedPair, StepLosses};
pub use losses::{combined_loss, correction_loss, evaluation_loss, target_ids};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{ConfigError, QtpError, TrainError};
use crate::model::{ModelConfig, ModelParams};
use crate::rng::{SeedStreams, StreamPurpose};
use crate::text::{Stage, TextStage};
use crate::transmit::{transmit_text, Link};
use crate::word_repair::{repair_text, Dictionary};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the correction loss in the combined loss.
    pub theta: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub focal_epsilon: f64,
    pub learning_rate: f64,
    /// Inner epoch count (K).
    pub epochs: usize,
    /// Outer iterations; the loop runs `epochs·outer_iterations` epochs
    /// in total.
    pub outer_iterations: usize,
    pub ema_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            focal_epsilon: 1e-8,
            learning_rate: 1e-3,
            epochs: 10,
            outer_iterations: 1,
            ema_decay: 0.999,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, reason: String| ConfigError::InvalidField {
            field: field.to_string(),
            reason,
        };
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(bad("train.theta", format!("{} outside [0, 1]", self.theta)));
        }
        if self.focal_gamma < 0.0 {
            return Err(bad("train.focal_gamma", "negative".into()));
        }
        if self.focal_epsilon <= 0.0 {
            return Err(bad("train.focal_epsilon", "must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(bad("train.learning_rate", "must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(bad(
                "train.ema_decay",
                format!("{} outside [0, 1]", self.ema_decay),
            ));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs * self.outer_iterations
    }
}

/// One supervised example: the ideal text, what arrived, what word repair
/// made of it, and which positions still need replacement.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub target: TextStage,
    pub received: TextStage,
    pub repaired: TextStage,
    /// qᵢ = true where the word-repaired word still differs from the
    /// target, i.e. the sentence-level model must replace it.
    pub labels: Vec<bool>,
    pub sent_bits: BitString,
    pub received_bits: BitString,
}

/// Replacement labels: true where the repaired word still differs from
/// the target word (surface comparison).
pub fn make_q_labels(t_w: &TextStage, t: &TextStage) -> Result<Vec<bool>, TrainError> {
    if t_w.word_count() != t.word_count() {
        return Err(TrainError::LengthMismatch {
            left: t_w.word_count(),
            right: t.word_count(),
        });
    }
    Ok(t_w
        .words()
        .iter()
        .zip(t.words())
        .map(|(w, target)| w != target)
        .collect())
}

/// Corrupt a corpus through the link and repair it word by word, pairing
/// each sentence with its supervision labels. Sentence `i` draws from
/// substream `stream_base + i`, so generation order is irrelevant.
pub fn generate_noisy_corpus(
    sentences: &[String],
    link: &Link,
    dict: &Dictionary,
    streams: &SeedStreams,
    stream_base: u32,
) -> Result<Vec<TrainingPair>, QtpError> {
    let mut pairs = Vec::with_capacity(sentences.len());
    for (i, sentence) in sentences.iter().enumerate() {
        let build = || -> Result<TrainingPair, QtpError> {
            let target = TextStage::parse(Stage::Ideal, sentence);
            let mut rng = streams.stream(StreamPurpose::Corpus, stream_base + i as u32);
            let tx = transmit_text(&target, link, &mut rng)?;
            let (repaired, _) = repair_text(&tx.received, dict)?;
            let labels = make_q_labels(&repaired, &target)?;
            Ok(TrainingPair {
                target,
                received: tx.received,
                repaired,
                labels,
                sent_bits: tx.sent_bits,
                received_bits: tx.received_bits,
            })
        };
        pairs.push(build().map_err(|e| TrainError::Corpus {
            line: i + 1,
            source: Box::new(e),
        })?);
    }
    Ok(pairs)
}

/// Train, validation, and test portions of a dataset.
pub type DatasetSplit<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Seeded shuffle followed by a ratio split. The validation and test
/// sizes round down; the remainder goes to training.
pub fn split_dataset<T, R: Rng>(
    mut items: Vec<T>,
    ratios: (u32, u32, u32),
    rng: &mut R,
) -> Result<DatasetSplit<T>, TrainError> {
    let (a, b, c) = ratios;
    if a + b + c != 100 {
        return Err(TrainError::BadSplit(a, b, c));
    }
    items.shuffle(rng);
    let n = items.len();
    let n_valid = n * b as usize / 100;
    let n_test = n * c as usize / 100;
    let test = items.split_off(n - n_test);
    let valid = items.split_off(items.len() - n_valid);
    Ok((items, valid, test))
}

/// shadow ← decay·shadow + (1−decay)·params, element-wise.
pub fn ema_update(shadow: &mut ModelParams, params: &ModelParams, decay: f64) {
    for (s, p) in shadow.tensors_mut().into_iter().zip(params.tensors()) {
        ndarray::Zip::from(s).and(p).for_each(|s, &p| {
            *s = decay * *s + (1.0 - decay) * p;
        });
    }
}

/// Per-epoch loss averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub loss_c: f64,
    pub loss_e: f64,
}

/// A finished training run.
pub struct TrainOutput {
    pub params: ModelParams,
    pub ema: ModelParams,
    pub history: Vec<EpochStats>,
}

/// Run the joint training loop: per epoch, shuffle the pairs, take one
/// gradient step per pair on the combined loss, then refresh the EMA
/// shadow. Aborts with the last finite-loss checkpoint if the loss stops
/// being finite.
pub fn train(
    pairs: &[TrainingPair],
    config: &ModelConfig,
    tcfg: &TrainConfig,
    streams: &SeedStreams,
) -> Result<TrainOutput, QtpError> {
    config.validate()?;
    tcfg.validate()?;
    if pairs.is_empty() {
        return Err(ConfigError::Other("empty training split".into()).into());
    }
    let prepared = pairs
        .iter()
        .map(|p| PreparedPair::from_pair(p, config))
        .collect::<Result<Vec<_>, _>>()?;

    let mut params = ModelParams::init(config, &mut streams.stream(StreamPurpose::WeightInit, 0));
    let mut shadow = params.clone();
    let mut adam = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let mut history = Vec::with_capacity(tcfg.total_epochs());
    let mut last_good = params.clone();

    for epoch in 0..tcfg.total_epochs() {
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        order.shuffle(&mut streams.stream(StreamPurpose::Shuffle, epoch as u32));
        let (mut sum, mut sum_c, mut sum_e) = (0.0, 0.0, 0.0);
        for &idx in &order {
            zero_params(&mut grads);
            let losses = joint_step(&prepared[idx], &params, config, tcfg, &mut grads)?;
            if !losses.combined.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    last_good: Box::new(last_good),
                }
                .into());
            }
            adam.step(&mut params, &grads, tcfg.learning_rate)?;
            sum += losses.combined;
            sum_c += losses.correction;
            sum_e += losses.evaluation;
        }
        ema_update(&mut shadow, &params, tcfg.ema_decay);
        let k = prepared.len() as f64;
        history.push(EpochStats {
            epoch,
            loss: sum / k,
            loss_c: sum_c / k,
            loss_e: sum_e / k,
        });
        last_good = params.clone();
    }
    Ok(TrainOutput {
        params,
        ema: shadow,
        history,
    })
}

fn zero_params(p: &mut ModelParams) {
    for t in p.tensors_mut() {
        t.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::TransmitMode;
    use crate::model::Vocab;
    use crate::quantum::{ChannelConfig, ChannelKind};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn q_labels_mark_residual_errors() {
        let t = TextStage::parse(Stage::Ideal, "the cat");
        let t_w = TextStage::parse(Stage::WordRepaired, "the cot");
        assert_eq!(make_q_labels(&t_w, &t).unwrap(), vec![false, true]);
        let same = TextStage::parse(Stage::WordRepaired, "the cat");
        assert_eq!(make_q_labels(&same, &t).unwrap(), vec![false, false]);
        let all = TextStage::parse(Stage::WordRepaired, "xxx yyy");
        assert_eq!(make_q_labels(&all, &t).unwrap(), vec![true, true]);
    }

    #[test]
    fn noiseless_corpus_has_clean_labels() {
        let sentences: Vec<String> = vec!["the cat sat".into(), "a dog ran".into()];
        let dict = Dictionary::from_corpus(sentences.iter().map(String::as_str)).unwrap();
        let link = Link::resolve(
            &ChannelConfig::new(ChannelKind::BitFlip, 0.0, 2),
            TransmitMode::Qubit,
        )
        .unwrap();
        let streams = SeedStreams::new(5);
        let pairs = generate_noisy_corpus(&sentences, &link, &dict, &streams, 0).unwrap();
        assert_eq!(pairs.len(), 2);
        for pair in &pairs {
            assert_eq!(pair.repaired.render(), pair.target.render());
            assert!(pair.labels.iter().all(|&q| !q));
        }
    }

    #[test]
    fn full_noise_flips_every_x_bit_deterministically() {
        // At λ = 1 the qubit bit-flip channel is a point mass on x ⊕ 1,
        // so corruption is deterministic.
        let sentences: Vec<String> = vec!["hi".into()];
        let dict = Dictionary::from_words(["hi"]).unwrap();
        let link = Link::resolve(
            &ChannelConfig::new(ChannelKind::BitFlip, 1.0, 2),
            TransmitMode::Qubit,
        )
        .unwrap();
        let streams = SeedStreams::new(5);
        let pairs = generate_noisy_corpus(&sentences, &link, &dict, &streams, 0).unwrap();
        let pair = &pairs[0];
        // every x bit (odd positions) flipped, z bits intact
        let diffs = pair
            .sent_bits
            .diff_count(&pair.received_bits)
            .unwrap();
        assert_eq!(diffs, pair.sent_bits.len() / 2);
        for (i, (s, r)) in pair
            .sent_bits
            .iter()
            .zip(pair.received_bits.iter())
            .enumerate()
        {
            if i % 2 == 0 {
                assert_eq!(s, r, "z bit {i} flipped");
            } else {
                assert_ne!(s, r, "x bit {i} survived");
            }
        }
    }

    #[test]
    fn corpus_order_is_preserved() {
        let sentences: Vec<String> = (0..20).map(|i| format!("word{i} here")).collect();
        let dict = Dictionary::from_corpus(sentences.iter().map(String::as_str)).unwrap();
        let link = Link::resolve(
            &ChannelConfig::new(ChannelKind::BitFlip, 0.05, 2),
            TransmitMode::Qubit,
        )
        .unwrap();
        let streams = SeedStreams::new(5);
        let pairs = generate_noisy_corpus(&sentences, &link, &dict, &streams, 0).unwrap();
        assert_eq!(pairs.len(), 20);
        for (pair, s) in pairs.iter().zip(&sentences) {
            assert_eq!(&pair.target.render(), s);
        }
    }

    #[test]
    fn split_respects_ratios_and_partitions() {
        let streams = SeedStreams::new(9);
        let items: Vec<u32> = (0..100).collect();
        let (train, valid, test) = split_dataset(
            items.clone(),
            (80, 10, 10),
            &mut streams.stream(StreamPurpose::Split, 0),
        )
        .unwrap();
        assert_eq!((train.len(), valid.len(), test.len()), (80, 10, 10));
        let mut all: Vec<u32> = train.iter().chain(&valid).chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);

        let (train, valid, test) = split_dataset(
            (0..10u32).collect(),
            (80, 10, 10),
            &mut streams.stream(StreamPurpose::Split, 1),
        )
        .unwrap();
        assert_eq!((train.len(), valid.len(), test.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let streams = SeedStreams::new(9);
        let a = split_dataset(
            (0..50u32).collect(),
            (80, 10, 10),
            &mut streams.stream(StreamPurpose::Split, 0),
        )
        .unwrap();
        let b = split_dataset(
            (0..50u32).collect(),
            (80, 10, 10),
            &mut streams.stream(StreamPurpose::Split, 0),
        )
        .unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let streams = SeedStreams::new(9);
        assert!(split_dataset(
            vec![1, 2, 3],
            (80, 10, 5),
            &mut streams.stream(StreamPurpose::Split, 0)
        )
        .is_err());
    }

    #[test]
    fn ema_endpoints() {
        let vocab = Vocab::new(["a", "b"]).unwrap();
        let mut cfg = ModelConfig::new(vocab);
        cfg.num_blocks = 1;
        cfg.d_model = 4;
        cfg.heads = 1;
        cfg.ffn_dim = 8;
        let streams = SeedStreams::new(3);
        let params = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        let fresh = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 1));

        let mut shadow = fresh.clone();
        ema_update(&mut shadow, &params, 0.0);
        assert_eq!(shadow, params);

        let mut shadow = fresh.clone();
        ema_update(&mut shadow, &params, 1.0);
        assert_eq!(shadow, fresh);

        // decay 0.5 from zero shadow lands halfway
        let mut shadow = params.zeros_like();
        ema_update(&mut shadow, &params, 0.5);
        for (s, p) in shadow.tensors().iter().zip(params.tensors()) {
            for (a, b) in s.iter().zip(p.iter()) {
                assert_close(*a, 0.5 * b, 1e-15);
            }
        }
    }

    fn tiny_setup() -> (Vec<TrainingPair>, ModelConfig) {
        let sentences: Vec<String> = vec![
            "the cat sat".into(),
            "the dog ran".into(),
            "a cat ran".into(),
            "a dog sat".into(),
        ];
        let dict = Dictionary::from_corpus(sentences.iter().map(String::as_str)).unwrap();
        let link = Link::resolve(
            &ChannelConfig::new(ChannelKind::BitFlip, 0.02, 2),
            TransmitMode::Qubit,
        )
        .unwrap();
        let streams = SeedStreams::new(11);
        let pairs = generate_noisy_corpus(&sentences, &link, &dict, &streams, 0).unwrap();
        let vocab = Vocab::from_dictionary(&dict);
        let mut cfg = ModelConfig::new(vocab);
        cfg.num_blocks = 1;
        cfg.d_model = 16;
        cfg.heads = 2;
        cfg.ffn_dim = 32;
        cfg.max_len = 16;
        (pairs, cfg)
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (pairs, cfg) = tiny_setup();
        let streams = SeedStreams::new(11);
        let tcfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&pairs, &cfg, &tcfg, &streams).unwrap();
        let init = ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        assert_eq!(out.params, init);
        assert_eq!(out.ema, init);
        assert!(out.history.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let (pairs, cfg) = tiny_setup();
        let streams = SeedStreams::new(11);
        let tcfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let a = train(&pairs, &cfg, &tcfg, &streams).unwrap();
        let b = train(&pairs, &cfg, &tcfg, &streams).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.ema, b.ema);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn loss_trends_down_on_tiny_corpus() {
        let (pairs, cfg) = tiny_setup();
        let streams = SeedStreams::new(11);
        let tcfg = TrainConfig {
            epochs: 30,
            ema_decay: 0.9,
            ..TrainConfig::default()
        };
        let out = train(&pairs, &cfg, &tcfg, &streams).unwrap();
        let first = out.history.first().unwrap().loss;
        let last = out.history.last().unwrap().loss;
        assert!(
            last < first,
            "combined loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn divergence_aborts_with_last_good_checkpoint() {
        let (pairs, cfg) = tiny_setup();
        let streams = SeedStreams::new(11);
        // an absurd learning rate drives the loss to overflow quickly
        let tcfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e150,
            ..TrainConfig::default()
        };
        match train(&pairs, &cfg, &tcfg, &streams) {
            Err(crate::error::QtpError::Train(TrainError::Diverged { last_good, .. })) => {
                assert!(last_good.all_finite(), "checkpoint must predate divergence");
            }
            Err(crate::error::QtpError::Train(TrainError::NonFiniteGradient { .. })) => {
                // also a legitimate abort point on the same path
            }
            other => panic!("expected divergence, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn joint_gradients_match_finite_differences() {
        let (pairs, cfg) = tiny_setup();
        // d_model 8, one block, 3-word sentences
        let mut cfg = cfg;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.ffn_dim = 12;
        let tcfg = TrainConfig::default();
        let streams = SeedStreams::new(123);
        let mut params =
            ModelParams::init(&cfg, &mut streams.stream(StreamPurpose::WeightInit, 0));
        let prep = PreparedPair::from_pair(&pairs[0], &cfg).unwrap();
        // make at least one label positive so both focal branches fire
        let mut prep = prep;
        prep.labels[1] = true;

        let mut grads = params.zeros_like();
        joint_step(&prep, &params, &cfg, &tcfg, &mut grads).unwrap();

        let step = 1e-4;
        let mut worst: f64 = 0.0;
        for ti in 0..params.tensors().len() {
            let len = params.tensors()[ti].len();
            for &offset in &[0usize, len / 3, 2 * len / 3, len - 1] {
                let orig = params.tensors()[ti].as_slice().unwrap()[offset];
                params.tensors_mut()[ti].as_slice_mut().unwrap()[offset] = orig + step;
                let up = joint_loss(&prep, &params, &cfg, &tcfg).unwrap().combined;
                params.tensors_mut()[ti].as_slice_mut().unwrap()[offset] = orig - step;
                let down = joint_loss(&prep, &params, &cfg, &tcfg).unwrap().combined;
                params.tensors_mut()[ti].as_slice_mut().unwrap()[offset] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = grads.tensors()[ti].as_slice().unwrap()[offset];
                let rel = (numeric - analytic).abs()
                    / numeric.abs().max(analytic.abs()).max(1e-3);
                worst = worst.max(rel);
                assert!(
                    rel < 1e-4,
                    "tensor {ti} offset {offset}: numeric {numeric} vs analytic {analytic} (rel {rel:.2e})"
                );
            }
        }
        assert!(worst > 0.0);
    }
}
