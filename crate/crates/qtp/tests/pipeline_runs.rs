//! Integration tests of the run pipeline and the `qtp` binary surface:
//! manifests, transcripts, reports, exit codes, and file formats.

use std::path::{Path, PathBuf};
use std::process::Command;

use qtp::codec::TransmitMode;
use qtp::manifest::RunManifest;
use qtp::model::ModelSettings;
use qtp::pipeline::{
    default_length_buckets, load_corpus, run_detect, run_lengthscan, run_sweep, run_train,
    run_transmit, OutputFormat, UnitRecord,
};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::report::MetricsReport;
use qtp::trainer::TrainConfig;

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn small_manifest(dir: &Path, sentences: &[&str]) -> RunManifest {
    let corpus = dir.join("corpus.txt");
    write(&corpus, &(sentences.join("\n") + "\n"));
    RunManifest::new(
        11,
        TransmitMode::Qubit,
        corpus,
        ChannelConfig::new(ChannelKind::BitFlip, 0.0, 2),
    )
}

#[test]
fn noiseless_transmit_has_zero_error_rates() {
    let dir = tempfile::tempdir().unwrap();
    let man = small_manifest(
        dir.path(),
        &["the cat sat on the mat", "a quick brown fox jumped here"],
    );
    let out = run_transmit(&man, &dir.path().join("out"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.before.ber, Some(0.0));
    assert_eq!(out.report.before.wer, Some(0.0));
    assert_eq!(out.report.before.ser, Some(0.0));
    assert!(out.report.after.is_none(), "no checkpoint, no post-decoding");

    // transcript: header line + one record per unit, T^q equals T
    let transcript = std::fs::read_to_string(&out.transcript_path).unwrap();
    let mut lines = transcript.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["manifest_hash"], out.manifest_hash.as_str());
    for line in lines {
        let record: UnitRecord = serde_json::from_str(line).unwrap();
        assert_eq!(record.t, record.t_q);
        assert_eq!(record.ber, 0.0);
    }
}

#[test]
fn segmentation_produces_expected_unit_count() {
    let dir = tempfile::tempdir().unwrap();
    let words: Vec<String> = (0..41).map(|i| format!("w{i}")).collect();
    let sentence = words.join(" ");
    let man = small_manifest(dir.path(), &[sentence.as_str()]);
    let out = run_transmit(&man, &dir.path().join("out"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.n_units, 3, "41 words at max_unit 16 split into 3");

    let mut man_off = man.clone();
    man_off.segmentation = false;
    // 41 words + specials exceed the default transformerless path fine
    let out = run_transmit(&man_off, &dir.path().join("out2"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.n_units, 1);
}

#[test]
fn channel_use_accounting_matches_mode() {
    let dir = tempfile::tempdir().unwrap();
    let man = small_manifest(dir.path(), &["abcde fghij"]); // 11 chars
    let out = run_transmit(&man, &dir.path().join("q"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.channel_uses, 44);

    let mut man4 = man.clone();
    man4.mode = TransmitMode::Qudit4;
    let out = run_transmit(&man4, &dir.path().join("q4"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.channel_uses, 22);

    let mut manc = man.clone();
    manc.mode = TransmitMode::Classical;
    let out = run_transmit(&manc, &dir.path().join("c"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.channel_uses, 88);
}

#[test]
fn post_decode_without_checkpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut man = small_manifest(dir.path(), &["some words here"]);
    man.post_decode = Some(true);
    let err = run_transmit(&man, &dir.path().join("out"), OutputFormat::Json).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn non_ascii_corpus_is_a_data_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, "clean line\nbad liné here\n");
    let err = load_corpus(&corpus).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 2"), "message was {msg}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn empty_corpus_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, "\n\n  \n");
    let man = RunManifest::new(
        1,
        TransmitMode::Qubit,
        corpus,
        ChannelConfig::new(ChannelKind::BitFlip, 0.01, 2),
    );
    let err = man.validate().unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("no sentences"));
}

#[test]
fn out_of_range_lambda_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut man = small_manifest(dir.path(), &["plain words flow here"]);
    man.channel.lambda = 1.5;
    let err = man.validate().unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn train_rejects_tiny_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let man = small_manifest(dir.path(), &["one sentence only here now"]);
    let err = run_train(&man, &dir.path().join("out")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("too small"));
}

fn corpus_lines(n: usize) -> Vec<String> {
    let vocab = [
        "the", "old", "cat", "dog", "fox", "sat", "ran", "hid", "near", "rock", "tree", "pond",
        "gate", "road", "barn", "slow", "grey", "calm",
    ];
    use rand::Rng;
    let streams = qtp::rng::SeedStreams::new(77);
    let mut rng = streams.stream(qtp::rng::StreamPurpose::Corpus, 42);
    (0..n)
        .map(|_| {
            let len = rng.random_range(5..=9);
            (0..len)
                .map(|_| vocab[rng.random_range(0..vocab.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn trained_manifest(dir: &Path) -> (RunManifest, PathBuf) {
    let corpus_path = dir.join("corpus.txt");
    write(&corpus_path, &(corpus_lines(60).join("\n") + "\n"));
    let mut man = RunManifest::new(
        5,
        TransmitMode::Qubit,
        corpus_path,
        ChannelConfig::new(ChannelKind::BitFlip, 0.02, 2),
    );
    man.model = ModelSettings {
        num_blocks: 1,
        d_model: 16,
        heads: 2,
        ffn_dim: 32,
        max_len: 16,
    };
    man.train = TrainConfig {
        epochs: 4,
        ema_decay: 0.8,
        ..TrainConfig::default()
    };
    let trained = run_train(&man, &dir.join("train")).unwrap();
    man.checkpoint = Some(trained.checkpoint_path.clone());
    (man, trained.history_path)
}

#[test]
fn train_history_has_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let (man, history_path) = trained_manifest(dir.path());
    let history = std::fs::read_to_string(history_path).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,L,L_c,L_e"));
    assert_eq!(lines.count(), man.train.total_epochs());
}

#[test]
fn sweep_emits_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut man = small_manifest(dir.path(), &["five short words go here", "more words travel this way"]);
    man.replicates = 2;
    let out = run_sweep(
        &man,
        &[0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0],
        &[TransmitMode::Classical, TransmitMode::Qubit, TransmitMode::Qudit4],
        &dir.path().join("sweep"),
    )
    .unwrap();
    assert_eq!(out.rows.len(), 60, "10 lambdas × 3 modes × 2 replicates");
    // λ = 0 rows have zero error everywhere
    for row in out.rows.iter().filter(|r| r.lambda == 0.0) {
        assert_eq!(row.ber_before, 0.0);
        assert_eq!(row.ser_before, 0.0);
    }
    let csv = std::fs::read_to_string(out.csv_path).unwrap();
    assert_eq!(csv.lines().count(), 61);
}

#[test]
fn detect_report_roundtrips_and_handles_zero_noise() {
    let dir = tempfile::tempdir().unwrap();
    let (mut man, _) = trained_manifest(dir.path());
    man.channel.lambda = 0.0;
    let out = run_detect(
        &man,
        &[
            ChannelKind::BitFlip,
            ChannelKind::PhaseFlip,
            ChannelKind::Depolarizing,
            ChannelKind::AmplitudeDamping,
        ],
        &dir.path().join("detect"),
    )
    .unwrap();
    assert_eq!(out.report.rows.len(), 4);
    for row in &out.report.rows {
        // noiseless: no corrupted positions, detection not applicable
        assert_eq!(row.report.detection_probability, None);
        assert_eq!(row.report.tp + row.report.fn_, 0);
    }

    // every embedded metrics report parses back losslessly
    let text = std::fs::read_to_string(&out.report_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    for row in parsed["rows"].as_array().unwrap() {
        let report: MetricsReport =
            serde_json::from_value(row["report"].clone()).unwrap();
        let back: MetricsReport = MetricsReport::from_json(&report.to_json()).unwrap();
        assert_eq!(report, back);
    }
}

#[test]
fn stage_word_counts_are_preserved_under_heavy_noise() {
    use qtp::pipeline::{assemble_dictionary, evaluate_corpus, load_model, EvalSettings};
    use qtp::rng::SeedStreams;
    use qtp::transmit::Link;

    let dir = tempfile::tempdir().unwrap();
    let (mut man, _) = trained_manifest(dir.path());
    man.channel.lambda = 0.3; // hot enough to corrupt many separator bytes
    let corpus = load_corpus(&man.corpus).unwrap();
    let link = Link::resolve(&man.channel, man.mode).unwrap();
    let model = load_model(man.checkpoint.as_ref().unwrap()).unwrap();
    let (dict, _) =
        assemble_dictionary(&corpus, None, Some(&model.config.vocab)).unwrap();
    let eval = evaluate_corpus(
        &corpus,
        &link,
        &dict,
        Some(&model),
        &EvalSettings::from_manifest(&man),
        &SeedStreams::new(man.seed),
    )
    .unwrap();
    for u in &eval.units {
        let n = u.ideal.word_count();
        assert_eq!(u.received.word_count(), n);
        assert_eq!(u.repaired.word_count(), n);
        assert_eq!(u.corrected.as_ref().unwrap().word_count(), n);
        assert_eq!(u.fused.as_ref().unwrap().word_count(), n);
        assert_eq!(u.labels.len(), n);
    }
    for s in &eval.sentences {
        assert_eq!(s.received.word_count(), s.ideal.word_count());
        assert_eq!(s.fused.as_ref().unwrap().word_count(), s.ideal.word_count());
    }
}

#[test]
fn lengthscan_has_fixed_columns_and_na_for_empty_buckets() {
    let dir = tempfile::tempdir().unwrap();
    let (man, _) = trained_manifest(dir.path());
    let out = run_lengthscan(&man, &default_length_buckets(), &dir.path().join("len")).unwrap();
    let csv = std::fs::read_to_string(&out.csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bucket,n_sentences,ser_before,ser_after"));
    // corpus sentences are 5..=9 words: the 1-4 and 17+ buckets are empty
    assert!(csv.contains("1-4,0,NA,NA"));
    assert!(csv.contains("17+,0,NA,NA"));
    assert_eq!(out.rows.len(), 3);
}

// ------------------------------------------------------------------
// binary surface
// ------------------------------------------------------------------

fn qtp_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtp"))
}

#[test]
fn binary_transmit_runs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let man = small_manifest(dir.path(), &["words move through the channel"]);
    let manifest_path = dir.path().join("manifest.toml");
    write(&manifest_path, &man.to_toml());
    let out = qtp_bin()
        .args([
            "transmit",
            "--manifest",
            manifest_path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
            "--channel",
            "bit_flip:0.01",
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/manifest.toml").exists());
    assert!(dir.path().join("out/transcript.jsonl").exists());
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn binary_uses_configuration_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut man = small_manifest(dir.path(), &["some words here again"]);
    man.post_decode = Some(true);
    let manifest_path = dir.path().join("manifest.toml");
    write(&manifest_path, &man.to_toml());
    let out = qtp_bin()
        .args([
            "transmit",
            "--manifest",
            manifest_path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_csv_format_and_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let man = small_manifest(dir.path(), &["one line of words here", "two lines of words here"]);
    let manifest_path = dir.path().join("manifest.toml");
    write(&manifest_path, &man.to_toml());

    // sweep under QTP_THREADS=1 must equal the default-parallelism sweep
    let run = |out_name: &str, threads: Option<&str>| {
        let mut cmd = qtp_bin();
        cmd.args([
            "sweep",
            "--manifest",
            manifest_path.to_str().unwrap(),
            "--out",
            dir.path().join(out_name).to_str().unwrap(),
            "--lambdas",
            "0.01,0.1",
            "--modes",
            "classical,qubit",
        ]);
        if let Some(t) = threads {
            cmd.env("QTP_THREADS", t);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.path().join(out_name).join("sweep.csv")).unwrap()
    };
    let serial = run("s1", Some("1"));
    let parallel = run("s2", None);
    assert_eq!(serial, parallel, "thread count changed sweep bytes");

    // csv report format for transmit
    let out = qtp_bin()
        .args([
            "transmit",
            "--manifest",
            manifest_path.to_str().unwrap(),
            "--out",
            dir.path().join("csv_out").to_str().unwrap(),
            "--format",
            "csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = std::fs::read_to_string(dir.path().join("csv_out/report.csv")).unwrap();
    assert!(report.starts_with("stage,ber,wer,ser,"));
}

#[test]
fn custom_channel_manifest_roundtrip() {
    // a custom Kraus set in the manifest: the identity channel written
    // out as explicit row-major (re, im) pairs
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    write(&corpus, "plain words cross a custom channel\n");
    let manifest_text = format!(
        r#"
seed = 3
mode = "qubit"
corpus = {corpus:?}

[channel]
kind = "custom"
lambda = 0.0
d = 2
kraus = [[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]]
"#,
        corpus = corpus.to_str().unwrap()
    );
    let manifest_path = dir.path().join("manifest.toml");
    write(&manifest_path, &manifest_text);
    let man = RunManifest::load(&manifest_path).unwrap();
    let out = run_transmit(&man, &dir.path().join("out"), OutputFormat::Json).unwrap();
    assert_eq!(out.report.before.wer, Some(0.0), "identity channel is noiseless");
}
