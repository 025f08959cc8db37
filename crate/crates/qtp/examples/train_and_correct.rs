//! End-to-end run with the library API: build a corpus, train the joint
//! correction/evaluation model on noisy transmissions, then transmit
//! fresh text and watch the stages repair it.
//!
//! ```bash
//! cargo run -p qtp --example train_and_correct
//! ```

use rand::Rng;

use qtp::codec::{normalize_display, TransmitMode};
use qtp::model::{
    correction_forward, decode_correction, evaluation_forward, fuse, ModelConfig, ModelSettings,
    Vocab,
};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::trainer::{generate_noisy_corpus, split_dataset, train, TrainConfig};
use qtp::transmit::Link;
use qtp::word_repair::Dictionary;

const VOCAB: &[&str] = &[
    "the", "a", "cat", "dog", "bird", "fox", "owl", "mouse", "sat", "ran", "slept", "jumped",
    "waited", "on", "under", "near", "behind", "mat", "tree", "rock", "house", "river", "stone",
    "moon", "sun", "wind", "leaf", "road", "barn", "field", "gate", "hill", "pond", "star",
    "cloud", "rain", "snow", "red", "big", "small", "old", "quiet",
];

fn corpus(streams: &SeedStreams, sentences: usize) -> Vec<String> {
    let mut rng = streams.stream(StreamPurpose::Corpus, 999);
    (0..sentences)
        .map(|_| {
            let n = rng.random_range(5..=12);
            (0..n)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let streams = SeedStreams::new(7);
    let sentences = corpus(&streams, 150);
    let channel = ChannelConfig::new(ChannelKind::BitFlip, 0.01, 2);
    let link = Link::resolve(&channel, TransmitMode::Qubit)?;
    let dict = Dictionary::from_corpus(sentences.iter().map(String::as_str))?;

    println!("generating noisy training pairs...");
    let pairs = generate_noisy_corpus(&sentences, &link, &dict, &streams, 0)?;
    let (train_split, valid, test) = split_dataset(
        pairs,
        (80, 10, 10),
        &mut streams.stream(StreamPurpose::Split, 0),
    )?;
    println!(
        "split: {} train / {} valid / {} test",
        train_split.len(),
        valid.len(),
        test.len()
    );

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
    println!("training {} epochs...", tcfg.total_epochs());
    let out = train(&train_split, &config, &tcfg, &streams)?;
    for row in out.history.iter().step_by(3) {
        println!(
            "  epoch {:>2}  L={:.4}  L_c={:.4}  L_e={:.4}",
            row.epoch, row.loss, row.loss_c, row.loss_e
        );
    }

    // Inference runs on the EMA shadow, like the training loop returns.
    let params = &out.ema;
    println!("\nheld-out repairs:");
    let mut fixed = 0usize;
    let mut shown = 0usize;
    for pair in &test {
        let p_c = correction_forward(&pair.repaired, params, &config)?;
        let t_c = decode_correction(&p_c, &config.vocab, &pair.repaired)?;
        let conf = evaluation_forward(&pair.repaired, &t_c, params, &config)?;
        let t_e = fuse(&pair.repaired, &t_c, &conf, 0.5)?;
        let clean = t_e.words() == pair.target.words();
        fixed += usize::from(clean);
        if shown < 3 && pair.target.words() != pair.received.words() {
            shown += 1;
            println!("  sent:      {}", pair.target.render());
            println!("  received:  {}", normalize_display(&pair.received.render()));
            println!("  repaired:  {}", normalize_display(&pair.repaired.render()));
            println!("  final:     {}  <- {}", t_e.render(), if clean { "ok" } else { "still wrong" });
        }
    }
    println!(
        "\n{} of {} held-out sentences end error-free",
        fixed,
        test.len()
    );
    Ok(())
}
