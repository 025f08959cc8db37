//! Sweep the four qubit noise models at a fixed strength and compare
//! sentence error rates before and after post-decoding with a freshly
//! trained model, plus the resulting SER reduction ratio.
//!
//! ```bash
//! cargo run -p qtp --example noise_model_sweep
//! ```

use rand::Rng;

use qtp::codec::TransmitMode;
use qtp::metrics::ser_reduction_ratio;
use qtp::model::{
    correction_forward, decode_correction, evaluation_forward, fuse, ModelConfig, ModelSettings,
    Vocab,
};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::report::na;
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::trainer::{generate_noisy_corpus, train, TrainConfig};
use qtp::transmit::Link;
use qtp::word_repair::Dictionary;

const VOCAB: &[&str] = &[
    "the", "a", "crew", "ship", "tide", "wave", "sail", "rope", "wind", "storm", "coast", "rock",
    "light", "tower", "chart", "deck", "mast", "anchor", "harbor", "gull", "found", "lost",
    "turned", "held", "dropped", "watched", "north", "south", "slowly", "again",
];

fn make_corpus(streams: &SeedStreams, n: usize) -> Vec<String> {
    let mut rng = streams.stream(StreamPurpose::Corpus, 7777);
    (0..n)
        .map(|_| {
            let len = rng.random_range(5..=12);
            (0..len)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let lambda = 0.01;
    let streams = SeedStreams::new(123);
    let corpus = make_corpus(&streams, 120);
    let dict = Dictionary::from_corpus(corpus.iter().map(String::as_str))?;
    let config = ModelConfig::with_settings(
        Vocab::from_dictionary(&dict),
        ModelSettings {
            num_blocks: 2,
            d_model: 32,
            heads: 4,
            ffn_dim: 64,
            max_len: 32,
        },
    );
    let tcfg = TrainConfig {
        epochs: 10,
        ema_decay: 0.8,
        ..TrainConfig::default()
    };

    // One model, trained on bit-flip corruptions only, evaluated across
    // all four noise models: no noise labels or parameters are given to
    // the network.
    let train_link = Link::resolve(&ChannelConfig::new(ChannelKind::BitFlip, lambda, 2), TransmitMode::Qubit)?;
    let pairs = generate_noisy_corpus(&corpus, &train_link, &dict, &streams, 0)?;
    println!("training on {} bit-flip pairs...\n", pairs.len());
    let model = train(&pairs, &config, &tcfg, &streams)?;

    println!(
        "{:<18} {:>10} {:>10} {:>12}",
        "noise model", "SER before", "SER after", "reduction"
    );
    for kind in [
        ChannelKind::BitFlip,
        ChannelKind::PhaseFlip,
        ChannelKind::Depolarizing,
        ChannelKind::AmplitudeDamping,
    ] {
        let link = Link::resolve(&ChannelConfig::new(kind, lambda, 2), TransmitMode::Qubit)?;
        // fresh corruptions for evaluation, disjoint substreams
        let eval_pairs = generate_noisy_corpus(&corpus, &link, &dict, &streams, 500_000)?;
        let mut bad_before = 0usize;
        let mut bad_after = 0usize;
        for pair in &eval_pairs {
            if pair.received.words() != pair.target.words() {
                bad_before += 1;
            }
            let p_c = correction_forward(&pair.repaired, &model.ema, &config)?;
            let t_c = decode_correction(&p_c, &config.vocab, &pair.repaired)?;
            let conf = evaluation_forward(&pair.repaired, &t_c, &model.ema, &config)?;
            let t_e = fuse(&pair.repaired, &t_c, &conf, 0.5)?;
            if t_e.words() != pair.target.words() {
                bad_after += 1;
            }
        }
        let n = eval_pairs.len() as f64;
        let before = bad_before as f64 / n;
        let after = bad_after as f64 / n;
        println!(
            "{:<18} {:>10.4} {:>10.4} {:>12}",
            kind.as_str(),
            before,
            after,
            na(ser_reduction_ratio(before, after)),
        );
    }
    Ok(())
}
