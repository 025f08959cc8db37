//! End-to-end runs behind the `qtp` subcommands: transmit, train, sweep,
//! detect, and lengthscan.
//!
//! Every run writes its resolved manifest before any other artifact;
//! transcripts and reports carry the manifest hash, and replaying a
//! manifest reproduces every output byte for byte.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::codec::{channel_uses, normalize_display, segment_text, SegmentPlan, TransmitMode};
use crate::error::{ConfigError, QtpError};
use crate::manifest::RunManifest;
use crate::metrics::{
    confusion_scores, detection_probability, ser_reduction_ratio, tally_confusion, ConfusionCounts,
};
use crate::model::{
    correction_forward, decode_correction, detect_errors, evaluation_forward, fuse, ModelConfig,
    ModelParams, Vocab,
};
use crate::quantum::ChannelKind;
use crate::report::{na, MetricsReport};
use crate::rng::{SeedStreams, StreamPurpose};
use crate::text::{Stage, TextStage};
use crate::trainer::{generate_noisy_corpus, make_q_labels, split_dataset, train, TrainingPair};
use crate::transmit::{transmit_text, Link};
use crate::word_repair::{repair_text, Dictionary};

/// Read a corpus: ASCII text, one sentence per line, LF-terminated.
/// Blank lines are skipped; non-ASCII content is rejected with its line
/// number.
pub fn load_corpus(path: &Path) -> Result<Vec<String>, QtpError> {
    let text = std::fs::read_to_string(path).map_err(|e| QtpError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut sentences = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(ch) = line.chars().find(|c| !c.is_ascii()) {
            return Err(QtpError::Data {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("non-ASCII character {ch:?}"),
            });
        }
        sentences.push(line.to_string());
    }
    Ok(sentences)
}

/// The dictionary for a run: the corpus vocabulary, the checkpoint
/// vocabulary when a model is loaded, and an optional external word
/// list, merged. Returns the dictionary and a description of its source
/// for the report.
pub fn assemble_dictionary(
    corpus: &[String],
    external: Option<&Path>,
    checkpoint_vocab: Option<&Vocab>,
) -> Result<(Dictionary, String), QtpError> {
    let mut dict = Dictionary::from_corpus(corpus.iter().map(String::as_str))?;
    let mut source = String::from("corpus");
    if let Some(vocab) = checkpoint_vocab {
        let words: Vec<String> = vocab
            .tokens()
            .iter()
            .skip(crate::model::SPECIAL_TOKENS.len())
            .cloned()
            .collect();
        dict.extend_from(&Dictionary::from_words(words)?);
        source.push_str("+checkpoint");
    }
    if let Some(path) = external {
        dict.extend_from(&Dictionary::load(path)?);
        source.push_str("+file");
    }
    Ok((dict, source))
}

/// A loaded model ready for post-decoding. Inference runs on the EMA
/// shadow, which is what the training loop returns as its result.
pub struct LoadedModel {
    pub config: ModelConfig,
    pub params: ModelParams,
}

pub fn load_model(path: &Path) -> Result<LoadedModel, QtpError> {
    let ckpt = Checkpoint::load(path)?;
    let (config, _, ema) = ckpt.restore()?;
    Ok(LoadedModel {
        config,
        params: ema,
    })
}

/// One transmitted unit with all its pipeline stages.
pub struct UnitEval {
    pub sentence: usize,
    pub unit: usize,
    pub ideal: TextStage,
    pub received: TextStage,
    pub repaired: TextStage,
    pub corrected: Option<TextStage>,
    pub fused: Option<TextStage>,
    pub confidence: Option<Vec<f64>>,
    pub detected: Option<BTreeSet<usize>>,
    pub labels: Vec<bool>,
    pub sent_bits: crate::bits::BitString,
    pub received_bits: crate::bits::BitString,
}

/// Sentence-level stage texts reassembled from units.
pub struct SentenceEval {
    pub ideal: TextStage,
    pub received: TextStage,
    pub repaired: TextStage,
    pub fused: Option<TextStage>,
}

pub struct CorpusEval {
    pub units: Vec<UnitEval>,
    pub sentences: Vec<SentenceEval>,
    pub channel_uses_total: u64,
}

/// Pipeline knobs shared by the run commands.
#[derive(Debug, Clone, Copy)]
pub struct EvalSettings {
    pub segmentation: bool,
    pub max_unit: usize,
    pub threshold: f64,
    pub mode: TransmitMode,
}

impl EvalSettings {
    pub fn from_manifest(man: &RunManifest) -> Self {
        Self {
            segmentation: man.segmentation,
            max_unit: man.max_unit,
            threshold: man.confidence_threshold,
            mode: man.mode,
        }
    }
}

/// Run the full pipeline over a corpus: segment, transmit, word-repair,
/// and (with a model) correct, score, and fuse. Unit `k` of the whole
/// run draws from transmit substream `k`.
pub fn evaluate_corpus(
    corpus: &[String],
    link: &Link,
    dict: &Dictionary,
    model: Option<&LoadedModel>,
    settings: &EvalSettings,
    streams: &SeedStreams,
) -> Result<CorpusEval, QtpError> {
    let EvalSettings {
        segmentation,
        max_unit,
        threshold,
        mode,
    } = *settings;
    let mut units = Vec::new();
    let mut sentences = Vec::new();
    let mut unit_counter: u32 = 0;
    let mut uses_total: u64 = 0;

    for (si, sentence) in corpus.iter().enumerate() {
        let ideal_full = TextStage::parse(Stage::Ideal, sentence);
        let plan: SegmentPlan = if segmentation {
            segment_text(&ideal_full, max_unit)?
        } else {
            SegmentPlan {
                unit_bounds: vec![(0, ideal_full.word_count())],
                max_unit,
            }
        };

        let mut words_q = Vec::with_capacity(ideal_full.word_count());
        let mut words_w = Vec::with_capacity(ideal_full.word_count());
        let mut words_e = model.map(|_| Vec::with_capacity(ideal_full.word_count()));

        for (ui, &(start, end)) in plan.unit_bounds.iter().enumerate() {
            let ideal = ideal_full.slice_words(Stage::Ideal, start, end);
            let mut rng = streams.stream(StreamPurpose::Transmit, unit_counter);
            unit_counter += 1;
            uses_total += channel_uses(ideal.char_len(), mode) as u64;

            let tx = transmit_text(&ideal, link, &mut rng)?;
            let (repaired, _) = repair_text(&tx.received, dict)?;
            let labels = make_q_labels(&repaired, &ideal)?;

            let mut corrected = None;
            let mut fused = None;
            let mut confidence = None;
            let mut detected = None;
            if let Some(m) = model {
                let p_c = correction_forward(&repaired, &m.params, &m.config)?;
                let t_c = decode_correction(&p_c, &m.config.vocab, &repaired)?;
                let conf = evaluation_forward(&repaired, &t_c, &m.params, &m.config)?;
                let t_e = fuse(&repaired, &t_c, &conf, threshold)?;
                detected = Some(detect_errors(&conf, threshold));
                confidence = Some(conf.scores().to_vec());
                corrected = Some(t_c);
                fused = Some(t_e);
            }

            words_q.extend(tx.received.words().iter().cloned());
            words_w.extend(repaired.words().iter().cloned());
            if let (Some(acc), Some(t_e)) = (words_e.as_mut(), fused.as_ref()) {
                acc.extend(t_e.words().iter().cloned());
            }
            units.push(UnitEval {
                sentence: si,
                unit: ui,
                ideal,
                received: tx.received,
                repaired,
                corrected,
                fused,
                confidence,
                detected,
                labels,
                sent_bits: tx.sent_bits,
                received_bits: tx.received_bits,
            });
        }

        sentences.push(SentenceEval {
            received: ideal_full.with_words(Stage::Received, words_q),
            repaired: ideal_full.with_words(Stage::WordRepaired, words_w),
            fused: words_e.map(|w| ideal_full.with_words(Stage::Fused, w)),
            ideal: ideal_full,
        });
    }
    Ok(CorpusEval {
        units,
        sentences,
        channel_uses_total: uses_total,
    })
}

/// Micro-averaged error rates over a finished evaluation.
pub struct StageRates {
    pub ber: f64,
    pub wer_received: f64,
    pub wer_repaired: f64,
    pub wer_fused: Option<f64>,
    pub ser_received: f64,
    pub ser_repaired: f64,
    pub ser_fused: Option<f64>,
    pub n_bits: u64,
    pub n_words: u64,
    pub n_sentences: u64,
}

pub fn stage_rates(eval: &CorpusEval) -> StageRates {
    let mut bits_total = 0u64;
    let mut bits_wrong = 0u64;
    for u in &eval.units {
        bits_total += u.sent_bits.len() as u64;
        bits_wrong += u.sent_bits.diff_count(&u.received_bits).unwrap_or(0) as u64;
    }
    let mut words_total = 0u64;
    let (mut wrong_q, mut wrong_w, mut wrong_e) = (0u64, 0u64, 0u64);
    let (mut ser_q, mut ser_w, mut ser_e) = (0u64, 0u64, 0u64);
    let mut have_fused = true;
    for s in &eval.sentences {
        words_total += s.ideal.word_count() as u64;
        let miss = |h: &TextStage| {
            s.ideal
                .words()
                .iter()
                .zip(h.words())
                .filter(|(a, b)| a != b)
                .count() as u64
        };
        let mq = miss(&s.received);
        let mw = miss(&s.repaired);
        wrong_q += mq;
        wrong_w += mw;
        ser_q += u64::from(mq > 0);
        ser_w += u64::from(mw > 0);
        match &s.fused {
            Some(f) => {
                let me = miss(f);
                wrong_e += me;
                ser_e += u64::from(me > 0);
            }
            None => have_fused = false,
        }
    }
    let n = eval.sentences.len() as u64;
    let frac = |num: u64, den: u64| if den > 0 { num as f64 / den as f64 } else { 0.0 };
    StageRates {
        ber: frac(bits_wrong, bits_total),
        wer_received: frac(wrong_q, words_total),
        wer_repaired: frac(wrong_w, words_total),
        wer_fused: have_fused.then(|| frac(wrong_e, words_total)),
        ser_received: frac(ser_q, n),
        ser_repaired: frac(ser_w, n),
        ser_fused: have_fused.then(|| frac(ser_e, n)),
        n_bits: bits_total,
        n_words: words_total,
        n_sentences: n,
    }
}

/// Keep only the metrics selected in the manifest; deselected ones are
/// reported as not-applicable.
fn apply_selection(mut r: MetricsReport, selected: &[String]) -> MetricsReport {
    let has = |name: &str| selected.iter().any(|m| m == name);
    if !has("ber") {
        r.ber = None;
    }
    if !has("wer") {
        r.wer = None;
    }
    if !has("ser") {
        r.ser = None;
    }
    if !has("ser_reduction") {
        r.ser_reduction = None;
    }
    if !has("detection") {
        r.detection_probability = None;
    }
    r
}

/// One transcript line: a transmitted unit with stage strings
/// (display-normalized) and raw bit payloads in hex.
#[derive(Debug, Serialize, Deserialize)]
pub struct UnitRecord {
    pub sentence: usize,
    pub unit: usize,
    pub t: String,
    pub t_q: String,
    pub t_w: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_c: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_e: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected: Option<Vec<usize>>,
    pub sent_hex: String,
    pub received_hex: String,
    pub ber: f64,
    pub wer_received: f64,
    pub wer_repaired: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wer_fused: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub manifest_hash: String,
    pub rng_algorithm: String,
    pub dictionary_source: String,
}

/// Aggregate report of a transmit run.
#[derive(Debug, Serialize, Deserialize)]
pub struct TransmitReport {
    pub manifest_hash: String,
    pub rng_algorithm: String,
    pub mode: TransmitMode,
    pub channel_kind: String,
    pub lambda: f64,
    pub dictionary_source: String,
    pub n_units: u64,
    pub channel_uses: u64,
    /// T vs T^q.
    pub before: MetricsReport,
    /// T vs T^w.
    pub after_word_repair: MetricsReport,
    /// T vs T^e; absent without post-decoding.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<MetricsReport>,
}

#[derive(Debug)]
pub struct TransmitArtifacts {
    pub manifest_hash: String,
    pub transcript_path: PathBuf,
    pub report_path: PathBuf,
    pub report: TransmitReport,
}

fn ensure_dir(dir: &Path) -> Result<(), QtpError> {
    std::fs::create_dir_all(dir).map_err(|e| QtpError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), QtpError> {
    std::fs::write(path, content).map_err(|e| QtpError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Transmit a corpus end to end and write `manifest.toml`,
/// `transcript.jsonl`, and `report.{json,csv}` into `out_dir`.
pub fn run_transmit(
    man: &RunManifest,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<TransmitArtifacts, QtpError> {
    man.validate()?;
    ensure_dir(out_dir)?;
    let manifest_hash = man.write_resolved(&out_dir.join("manifest.toml"))?;

    let corpus = load_corpus(&man.corpus)?;
    let link = Link::resolve(&man.channel, man.mode)?;
    let model = if man.post_decode_enabled() {
        let path = man
            .checkpoint
            .as_ref()
            .ok_or(ConfigError::MissingCheckpoint)?;
        Some(load_model(path)?)
    } else {
        None
    };
    let (dict, dictionary_source) = assemble_dictionary(
        &corpus,
        man.dictionary.as_deref(),
        model.as_ref().map(|m| &m.config.vocab),
    )?;

    let streams = SeedStreams::new(man.seed);
    let eval = evaluate_corpus(
        &corpus,
        &link,
        &dict,
        model.as_ref(),
        &EvalSettings::from_manifest(man),
        &streams,
    )?;

    // transcript
    let transcript_path = out_dir.join("transcript.jsonl");
    let mut transcript = String::new();
    let header = TranscriptHeader {
        manifest_hash: manifest_hash.clone(),
        rng_algorithm: crate::rng::RNG_ALGORITHM.to_string(),
        dictionary_source: dictionary_source.clone(),
    };
    transcript.push_str(&serde_json::to_string(&header).expect("header serializes"));
    transcript.push('\n');
    for u in &eval.units {
        let record = UnitRecord {
            sentence: u.sentence,
            unit: u.unit,
            t: u.ideal.render(),
            t_q: normalize_display(&u.received.render()),
            t_w: normalize_display(&u.repaired.render()),
            t_c: u.corrected.as_ref().map(|t| normalize_display(&t.render())),
            t_e: u.fused.as_ref().map(|t| normalize_display(&t.render())),
            confidence: u.confidence.clone(),
            detected: u.detected.as_ref().map(|d| d.iter().copied().collect()),
            sent_hex: u.sent_bits.to_hex(),
            received_hex: u.received_bits.to_hex(),
            ber: crate::metrics::ber(&u.sent_bits, &u.received_bits).unwrap_or(0.0),
            wer_received: crate::metrics::wer(&u.ideal, &u.received).unwrap_or(0.0),
            wer_repaired: crate::metrics::wer(&u.ideal, &u.repaired).unwrap_or(0.0),
            wer_fused: u
                .fused
                .as_ref()
                .map(|f| crate::metrics::wer(&u.ideal, f).unwrap_or(0.0)),
        };
        transcript.push_str(&serde_json::to_string(&record).expect("record serializes"));
        transcript.push('\n');
    }
    write_file(&transcript_path, &transcript)?;

    // aggregate report
    let rates = stage_rates(&eval);
    let base = MetricsReport {
        n_bits: rates.n_bits,
        n_words: rates.n_words,
        n_sentences: rates.n_sentences,
        ..Default::default()
    };
    let before = apply_selection(
        MetricsReport {
            ber: Some(rates.ber),
            wer: Some(rates.wer_received),
            ser: Some(rates.ser_received),
            ..base.clone()
        },
        &man.metrics,
    );
    let after_word_repair = apply_selection(
        MetricsReport {
            ber: Some(rates.ber),
            wer: Some(rates.wer_repaired),
            ser: Some(rates.ser_repaired),
            ser_reduction: ser_reduction_ratio(
                rates.ser_received,
                rates.ser_repaired,
            ),
            ..base.clone()
        },
        &man.metrics,
    );
    let after = rates.wer_fused.map(|wf| {
        apply_selection(
            MetricsReport {
                ber: Some(rates.ber),
                wer: Some(wf),
                ser: rates.ser_fused,
                ser_reduction: ser_reduction_ratio(
                    rates.ser_received,
                    rates.ser_fused.unwrap_or(0.0),
                ),
                ..base.clone()
            },
            &man.metrics,
        )
    });

    let report = TransmitReport {
        manifest_hash: manifest_hash.clone(),
        rng_algorithm: crate::rng::RNG_ALGORITHM.to_string(),
        mode: man.mode,
        channel_kind: man.channel.kind.clone(),
        lambda: man.channel.lambda,
        dictionary_source,
        n_units: eval.units.len() as u64,
        channel_uses: eval.channel_uses_total,
        before,
        after_word_repair,
        after,
    };

    let report_path = match format {
        OutputFormat::Json => {
            let path = out_dir.join("report.json");
            write_file(
                &path,
                &serde_json::to_string_pretty(&report).expect("report serializes"),
            )?;
            path
        }
        OutputFormat::Csv => {
            let path = out_dir.join("report.csv");
            let mut text = String::from("stage,");
            text.push_str(MetricsReport::csv_header());
            text.push('\n');
            for (stage, r) in [
                ("before", Some(&report.before)),
                ("after_word_repair", Some(&report.after_word_repair)),
                ("after", report.after.as_ref()),
            ] {
                if let Some(r) = r {
                    text.push_str(&format!("{stage},{}\n", r.to_csv_row()));
                }
            }
            write_file(&path, &text)?;
            path
        }
    };

    Ok(TransmitArtifacts {
        manifest_hash,
        transcript_path,
        report_path,
        report,
    })
}

/// Report format for run artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct TrainArtifacts {
    pub manifest_hash: String,
    pub checkpoint_path: PathBuf,
    pub history_path: PathBuf,
    pub final_loss: Option<f64>,
}

/// Generate a noisy corpus, split it 80:10:10, train the joint model on
/// the training split, and write the checkpoint plus the loss history.
pub fn run_train(man: &RunManifest, out_dir: &Path) -> Result<TrainArtifacts, QtpError> {
    // validation happens with post-decoding irrelevant: training builds
    // the checkpoint rather than consuming one
    let mut man_for_validation = man.clone();
    man_for_validation.post_decode = Some(false);
    man_for_validation.validate()?;
    ensure_dir(out_dir)?;
    let manifest_hash = man.write_resolved(&out_dir.join("manifest.toml"))?;

    let corpus = load_corpus(&man.corpus)?;
    if corpus.len() < 10 {
        return Err(ConfigError::CorpusTooSmall {
            sentences: corpus.len(),
        }
        .into());
    }
    let link = Link::resolve(&man.channel, man.mode)?;
    let (dict, _) = assemble_dictionary(&corpus, man.dictionary.as_deref(), None)?;
    let vocab = Vocab::from_dictionary(&dict);
    let config = ModelConfig::with_settings(vocab, man.model);
    config.validate().map_err(QtpError::from)?;

    let streams = SeedStreams::new(man.seed);
    let pairs = build_pairs(&corpus, &link, &dict, &streams, man)?;
    let (train_split, _valid, _test) = split_dataset(
        pairs,
        (80, 10, 10),
        &mut streams.stream(StreamPurpose::Split, 0),
    )?;
    if train_split.is_empty() {
        return Err(ConfigError::CorpusTooSmall {
            sentences: corpus.len(),
        }
        .into());
    }

    let out = train(&train_split, &config, &man.train, &streams)?;

    let checkpoint_path = out_dir.join("checkpoint.json");
    Checkpoint::new(man.seed, &config, &out.params, &out.ema, out.history.clone())
        .save(&checkpoint_path)?;

    let history_path = out_dir.join("history.csv");
    let mut csv = String::from("epoch,L,L_c,L_e\n");
    for row in &out.history {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.loss, row.loss_c, row.loss_e
        ));
    }
    write_file(&history_path, &csv)?;

    Ok(TrainArtifacts {
        manifest_hash,
        checkpoint_path,
        history_path,
        final_loss: out.history.last().map(|r| r.loss),
    })
}

/// The training population: sentences segmented into transmission units
/// when the manifest asks for it. Deterministic, so training and
/// detection reproduce the same population (and hence the same split)
/// from a manifest.
fn unit_sentences(corpus: &[String], man: &RunManifest) -> Result<Vec<String>, QtpError> {
    let mut units = Vec::new();
    for sentence in corpus {
        if man.segmentation {
            let parsed = TextStage::parse(Stage::Ideal, sentence);
            let plan = segment_text(&parsed, man.max_unit)?;
            for &(start, end) in &plan.unit_bounds {
                units.push(parsed.slice_words(Stage::Ideal, start, end).render());
            }
        } else {
            units.push(sentence.clone());
        }
    }
    Ok(units)
}

/// Segment sentences per the manifest, then corrupt each unit into a
/// training pair.
fn build_pairs(
    corpus: &[String],
    link: &Link,
    dict: &Dictionary,
    streams: &SeedStreams,
    man: &RunManifest,
) -> Result<Vec<TrainingPair>, QtpError> {
    generate_noisy_corpus(&unit_sentences(corpus, man)?, link, dict, streams, 0)
}

/// One sweep condition's results.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub mode: TransmitMode,
    pub kind: String,
    pub lambda: f64,
    pub replicate: usize,
    pub ber_before: f64,
    pub wer_before: f64,
    pub ser_before: f64,
    pub ber_after: Option<f64>,
    pub wer_after: Option<f64>,
    pub ser_after: Option<f64>,
    pub ser_reduction: Option<f64>,
}

pub struct SweepArtifacts {
    pub manifest_hash: String,
    pub csv_path: PathBuf,
    pub rows: Vec<SweepRow>,
}

/// Sweep (mode × λ × replicate) with the manifest's channel kind. Each
/// condition runs under its own derived seed, in parallel, and rows come
/// back sorted by the stable (mode, kind, λ, replicate) key.
pub fn run_sweep(
    man: &RunManifest,
    lambdas: &[f64],
    modes: &[TransmitMode],
    out_dir: &Path,
) -> Result<SweepArtifacts, QtpError> {
    man.validate()?;
    ensure_dir(out_dir)?;
    let manifest_hash = man.write_resolved(&out_dir.join("manifest.toml"))?;

    let corpus = load_corpus(&man.corpus)?;
    let model = if man.post_decode_enabled() {
        Some(load_model(man.checkpoint.as_ref().unwrap())?)
    } else {
        None
    };
    let (dict, _) = assemble_dictionary(
        &corpus,
        man.dictionary.as_deref(),
        model.as_ref().map(|m| &m.config.vocab),
    )?;

    // fixed enumeration order pins each condition's derived seed
    let mut conditions = Vec::new();
    for &mode in modes {
        for &lambda in lambdas {
            for replicate in 0..man.replicates {
                conditions.push((mode, lambda, replicate));
            }
        }
    }
    let streams = SeedStreams::new(man.seed);
    let seeds: Vec<u64> = (0..conditions.len())
        .map(|i| streams.child_seed(StreamPurpose::Replicate, i as u32))
        .collect();

    let pool = build_pool()?;
    let results: Result<Vec<SweepRow>, QtpError> = pool.install(|| {
        use rayon::prelude::*;
        conditions
            .par_iter()
            .zip(&seeds)
            .map(|(&(mode, lambda, replicate), &seed)| {
                let mut channel = man.channel.clone();
                channel.lambda = lambda;
                let link = Link::resolve(&channel, mode)?;
                let cstreams = SeedStreams::new(seed);
                let settings = EvalSettings {
                    mode,
                    ..EvalSettings::from_manifest(man)
                };
                let eval = evaluate_corpus(
                    &corpus,
                    &link,
                    &dict,
                    model.as_ref(),
                    &settings,
                    &cstreams,
                )?;
                let rates = stage_rates(&eval);
                Ok(SweepRow {
                    mode,
                    kind: man.channel.kind.clone(),
                    lambda,
                    replicate,
                    ber_before: rates.ber,
                    wer_before: rates.wer_received,
                    ser_before: rates.ser_received,
                    ber_after: rates.wer_fused.map(|_| rates.ber),
                    wer_after: rates.wer_fused,
                    ser_after: rates.ser_fused,
                    ser_reduction: rates
                        .ser_fused
                        .and_then(|after| ser_reduction_ratio(rates.ser_received, after)),
                })
            })
            .collect()
    });
    let mut rows = results?;
    rows.sort_by(|a, b| {
        (a.mode.as_str(), &a.kind, a.lambda, a.replicate)
            .partial_cmp(&(b.mode.as_str(), &b.kind, b.lambda, b.replicate))
            .expect("no NaN lambdas")
    });

    let csv_path = out_dir.join("sweep.csv");
    let mut csv = String::from(
        "mode,kind,lambda,replicate,ber_before,wer_before,ser_before,\
         ber_after,wer_after,ser_after,ser_reduction\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.mode,
            r.kind,
            r.lambda,
            r.replicate,
            r.ber_before,
            r.wer_before,
            r.ser_before,
            na(r.ber_after),
            na(r.wer_after),
            na(r.ser_after),
            na(r.ser_reduction),
        ));
    }
    write_file(&csv_path, &csv)?;

    Ok(SweepArtifacts {
        manifest_hash,
        csv_path,
        rows,
    })
}

/// Thread pool capped by `QTP_THREADS` when set.
fn build_pool() -> Result<rayon::ThreadPool, QtpError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("QTP_THREADS") {
        let n: usize = v.parse().map_err(|_| ConfigError::InvalidField {
            field: "QTP_THREADS".into(),
            reason: format!("{v:?} is not a thread count"),
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| ConfigError::Other(format!("thread pool: {e}")).into())
}

/// Detection quality for one noise condition.
#[derive(Debug, Serialize, Deserialize)]
pub struct DetectRow {
    pub kind: String,
    pub lambda: f64,
    pub report: MetricsReport,
    /// Per-sentence all-or-nothing variant: fraction of corrupted
    /// sentences whose flagged set matches the truth support exactly.
    pub detection_probability_sentence_exact: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectReport {
    pub manifest_hash: String,
    pub rng_algorithm: String,
    pub threshold: f64,
    pub rows: Vec<DetectRow>,
}

pub struct DetectArtifacts {
    pub manifest_hash: String,
    pub report_path: PathBuf,
    pub report: DetectReport,
}

/// Evaluate error localization on the held-out test split, per noise
/// kind, at the manifest's noise strength. The split is reproduced from
/// the manifest seed, so it matches the one held out by `run_train` on
/// the same manifest.
pub fn run_detect(
    man: &RunManifest,
    kinds: &[ChannelKind],
    out_dir: &Path,
) -> Result<DetectArtifacts, QtpError> {
    man.validate()?;
    if !man.post_decode_enabled() || man.checkpoint.is_none() {
        return Err(ConfigError::MissingCheckpoint.into());
    }
    ensure_dir(out_dir)?;
    let manifest_hash = man.write_resolved(&out_dir.join("manifest.toml"))?;

    let corpus = load_corpus(&man.corpus)?;
    let model = load_model(man.checkpoint.as_ref().unwrap())?;
    let (dict, _) = assemble_dictionary(
        &corpus,
        man.dictionary.as_deref(),
        Some(&model.config.vocab),
    )?;

    // splitting the unit population with the run's split stream yields
    // exactly the membership `run_train` held out on the same manifest
    let streams = SeedStreams::new(man.seed);
    let units = unit_sentences(&corpus, man)?;
    let (_, _, test_sentences) = split_dataset(
        units,
        (80, 10, 10),
        &mut streams.stream(StreamPurpose::Split, 0),
    )?;
    if test_sentences.is_empty() {
        return Err(ConfigError::CorpusTooSmall {
            sentences: corpus.len(),
        }
        .into());
    }

    let mut rows = Vec::new();
    for (ki, &kind) in kinds.iter().enumerate() {
        let mut channel = man.channel.clone();
        channel.kind = kind.as_str().to_string();
        channel.d = kind.dimension().unwrap_or(man.channel.d);
        let link = Link::resolve(&channel, man.mode)?;
        let pairs = generate_noisy_corpus(
            &test_sentences,
            &link,
            &dict,
            &streams,
            (1 + ki as u32) * 1_000_000,
        )?;

        let mut counts = ConfusionCounts::default();
        let mut flagged_all = BTreeSet::new();
        let mut truth_all = Vec::new();
        let mut corrupted_sentences = 0u64;
        let mut exact_hits = 0u64;
        for pair in &pairs {
            let p_c = correction_forward(&pair.repaired, &model.params, &model.config)?;
            let t_c = decode_correction(&p_c, &model.config.vocab, &pair.repaired)?;
            let conf = evaluation_forward(&pair.repaired, &t_c, &model.params, &model.config)?;
            let flagged = detect_errors(&conf, man.confidence_threshold);
            counts.merge(&tally_confusion(&flagged, &pair.labels)?);
            // global per-position view, offset by sentence
            let base = truth_all.len();
            for &p in &flagged {
                flagged_all.insert(base + p);
            }
            truth_all.extend(pair.labels.iter().copied());
            if pair.labels.iter().any(|&q| q) {
                corrupted_sentences += 1;
                let support: BTreeSet<usize> = pair
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &q)| q)
                    .map(|(i, _)| i + 1)
                    .collect();
                if flagged == support {
                    exact_hits += 1;
                }
            }
        }
        let scores = confusion_scores(&counts);
        let report = MetricsReport {
            detection_probability: detection_probability(&flagged_all, &truth_all),
            n_words: truth_all.len() as u64,
            n_sentences: pairs.len() as u64,
            ..Default::default()
        }
        .with_confusion(&counts, &scores);
        rows.push(DetectRow {
            kind: kind.as_str().to_string(),
            lambda: man.channel.lambda,
            report,
            detection_probability_sentence_exact: (corrupted_sentences > 0)
                .then(|| exact_hits as f64 / corrupted_sentences as f64),
        });
    }

    let report = DetectReport {
        manifest_hash: manifest_hash.clone(),
        rng_algorithm: crate::rng::RNG_ALGORITHM.to_string(),
        threshold: man.confidence_threshold,
        rows,
    };
    let report_path = out_dir.join("detect.json");
    write_file(
        &report_path,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(DetectArtifacts {
        manifest_hash,
        report_path,
        report,
    })
}

/// A sentence-length bucket: inclusive bounds, open-ended when `hi` is
/// `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthBucket {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl LengthBucket {
    pub fn contains(&self, n: usize) -> bool {
        n >= self.lo && self.hi.is_none_or(|hi| n <= hi)
    }

    pub fn label(&self) -> String {
        match self.hi {
            Some(hi) => format!("{}-{}", self.lo, hi),
            None => format!("{}+", self.lo),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if let Some(lo) = s.strip_suffix('+') {
            return Some(Self {
                lo: lo.parse().ok()?,
                hi: None,
            });
        }
        let (lo, hi) = s.split_once('-')?;
        Some(Self {
            lo: lo.parse().ok()?,
            hi: Some(hi.parse().ok()?),
        })
    }
}

pub fn default_length_buckets() -> Vec<LengthBucket> {
    vec![
        LengthBucket {
            lo: 1,
            hi: Some(4),
        },
        LengthBucket {
            lo: 5,
            hi: Some(16),
        },
        LengthBucket { lo: 17, hi: None },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthRow {
    pub bucket: String,
    pub n_sentences: u64,
    pub ser_before: Option<f64>,
    pub ser_after: Option<f64>,
}

pub struct LengthScanArtifacts {
    pub manifest_hash: String,
    pub csv_path: PathBuf,
    pub rows: Vec<LengthRow>,
}

/// Sentence error rate by sentence length, before and after the full
/// post-decoding pipeline.
pub fn run_lengthscan(
    man: &RunManifest,
    buckets: &[LengthBucket],
    out_dir: &Path,
) -> Result<LengthScanArtifacts, QtpError> {
    man.validate()?;
    if !man.post_decode_enabled() || man.checkpoint.is_none() {
        return Err(ConfigError::MissingCheckpoint.into());
    }
    ensure_dir(out_dir)?;
    let manifest_hash = man.write_resolved(&out_dir.join("manifest.toml"))?;

    let corpus = load_corpus(&man.corpus)?;
    let model = load_model(man.checkpoint.as_ref().unwrap())?;
    let (dict, _) = assemble_dictionary(
        &corpus,
        man.dictionary.as_deref(),
        Some(&model.config.vocab),
    )?;
    let link = Link::resolve(&man.channel, man.mode)?;
    let streams = SeedStreams::new(man.seed);
    let eval = evaluate_corpus(
        &corpus,
        &link,
        &dict,
        Some(&model),
        &EvalSettings::from_manifest(man),
        &streams,
    )?;

    let mut rows = Vec::new();
    for bucket in buckets {
        let mut n = 0u64;
        let mut bad_before = 0u64;
        let mut bad_after = 0u64;
        for s in &eval.sentences {
            if !bucket.contains(s.ideal.word_count()) {
                continue;
            }
            n += 1;
            if s.ideal.words() != s.received.words() {
                bad_before += 1;
            }
            if let Some(f) = &s.fused {
                if s.ideal.words() != f.words() {
                    bad_after += 1;
                }
            }
        }
        rows.push(LengthRow {
            bucket: bucket.label(),
            n_sentences: n,
            ser_before: (n > 0).then(|| bad_before as f64 / n as f64),
            ser_after: (n > 0).then(|| bad_after as f64 / n as f64),
        });
    }

    let csv_path = out_dir.join("lengthscan.csv");
    let mut csv = String::from("bucket,n_sentences,ser_before,ser_after\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.bucket,
            r.n_sentences,
            na(r.ser_before),
            na(r.ser_after)
        ));
    }
    write_file(&csv_path, &csv)?;

    Ok(LengthScanArtifacts {
        manifest_hash,
        csv_path,
        rows,
    })
}

/// Convenience used by the binary: print a one-line summary to stdout.
pub fn print_summary(out: &mut impl Write, report: &TransmitReport) -> std::io::Result<()> {
    writeln!(
        out,
        "units={} uses={} ser_before={} ser_after={}",
        report.n_units,
        report.channel_uses,
        na(report.before.ser),
        na(report.after.as_ref().and_then(|r| r.ser)),
    )
}
