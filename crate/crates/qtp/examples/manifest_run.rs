//! Drive the pipeline the way the `qtp` binary does: write a manifest,
//! train from it, then replay a transmit run twice and check the outputs
//! are byte-identical.
//!
//! ```bash
//! cargo run -p qtp --example manifest_run
//! ```

use rand::Rng;

use qtp::codec::TransmitMode;
use qtp::manifest::RunManifest;
use qtp::model::ModelSettings;
use qtp::pipeline::{run_train, run_transmit, OutputFormat};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::trainer::TrainConfig;

const VOCAB: &[&str] = &[
    "amber", "board", "cedar", "delta", "ember", "flint", "grove", "haven", "ivory", "jetty",
    "knoll", "larch", "maple", "north", "otter", "pearl", "quill", "ridge", "slate", "trail",
];

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("qtp_manifest_run");
    std::fs::create_dir_all(&dir)?;

    // corpus file
    let streams = SeedStreams::new(99);
    let mut rng = streams.stream(StreamPurpose::Corpus, 123);
    let corpus_path = dir.join("corpus.txt");
    let corpus: Vec<String> = (0..100)
        .map(|_| {
            let n = rng.random_range(5..=10);
            (0..n)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    std::fs::write(&corpus_path, corpus.join("\n") + "\n")?;

    // manifest
    let mut manifest = RunManifest::new(
        4242,
        TransmitMode::Qubit,
        corpus_path,
        ChannelConfig::new(ChannelKind::BitFlip, 0.01, 2),
    );
    manifest.model = ModelSettings {
        num_blocks: 2,
        d_model: 32,
        heads: 4,
        ffn_dim: 64,
        max_len: 32,
    };
    manifest.train = TrainConfig {
        epochs: 8,
        ema_decay: 0.8,
        ..TrainConfig::default()
    };

    println!("training...");
    let trained = run_train(&manifest, &dir.join("train"))?;
    println!("  checkpoint {}", trained.checkpoint_path.display());

    manifest.checkpoint = Some(trained.checkpoint_path.clone());
    println!("transmitting twice with the same manifest...");
    let a = run_transmit(&manifest, &dir.join("run_a"), OutputFormat::Json)?;
    let b = run_transmit(&manifest, &dir.join("run_b"), OutputFormat::Json)?;

    let bytes = |p: &std::path::Path| std::fs::read(p).unwrap();
    assert_eq!(a.manifest_hash, b.manifest_hash);
    assert_eq!(bytes(&a.transcript_path), bytes(&b.transcript_path));
    assert_eq!(bytes(&a.report_path), bytes(&b.report_path));
    println!("  replay is byte-identical (manifest {})", a.manifest_hash);
    println!(
        "  ser before {:?} -> after {:?}",
        a.report.before.ser,
        a.report.after.as_ref().and_then(|r| r.ser)
    );
    Ok(())
}
