//! Error localization: the evaluation head's confidence scores flag the
//! positions it believes are still corrupted after word repair. Compares
//! flagged positions against ground truth with confusion-matrix scores.
//!
//! A hotter channel than usual is used here so the training data
//! contains enough residual errors for the detector to learn from.
//!
//! ```bash
//! cargo run -p qtp --example error_detection
//! ```

use rand::Rng;

use qtp::codec::TransmitMode;
use qtp::metrics::{confusion_scores, detection_probability, tally_confusion, ConfusionCounts};
use qtp::model::{
    correction_forward, decode_correction, detect_errors, evaluation_forward, ModelConfig,
    ModelSettings, Vocab,
};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::report::na;
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::trainer::{generate_noisy_corpus, split_dataset, train, TrainConfig};
use qtp::transmit::Link;
use qtp::word_repair::Dictionary;

const VOCAB: &[&str] = &[
    "alarm", "basin", "cable", "diner", "eagle", "fable", "gamma", "hedge", "inlet", "joker",
    "kayak", "lemon", "mango", "noble", "ocean", "piano", "quilt", "radar", "salsa", "tiger",
    "ultra", "vapor", "wagon", "xenon", "yacht", "zebra",
];

fn main() -> anyhow::Result<()> {
    let streams = SeedStreams::new(55);
    let mut rng = streams.stream(StreamPurpose::Corpus, 424242);
    let corpus: Vec<String> = (0..160)
        .map(|_| {
            let n = rng.random_range(5..=10);
            (0..n)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();

    let lambda = 0.05;
    let link = Link::resolve(
        &ChannelConfig::new(ChannelKind::BitFlip, lambda, 2),
        TransmitMode::Qubit,
    )?;
    let dict = Dictionary::from_corpus(corpus.iter().map(String::as_str))?;
    let pairs = generate_noisy_corpus(&corpus, &link, &dict, &streams, 0)?;
    let positives: usize = pairs
        .iter()
        .map(|p| p.labels.iter().filter(|&&q| q).count())
        .sum();
    println!(
        "{} pairs, {} residual word errors after word repair",
        pairs.len(),
        positives
    );

    let (train_split, _, test) = split_dataset(
        pairs,
        (80, 10, 10),
        &mut streams.stream(StreamPurpose::Split, 0),
    )?;
    let config = ModelConfig::with_settings(
        Vocab::from_dictionary(&dict),
        ModelSettings {
            num_blocks: 2,
            d_model: 32,
            heads: 4,
            ffn_dim: 64,
            max_len: 16,
        },
    );
    let tcfg = TrainConfig {
        epochs: 30,
        ema_decay: 0.8,
        ..TrainConfig::default()
    };
    println!("training {} epochs on {} pairs...", tcfg.total_epochs(), train_split.len());
    let model = train(&train_split, &config, &tcfg, &streams)?;

    let threshold = 0.5;
    let mut counts = ConfusionCounts::default();
    let mut all_flagged = std::collections::BTreeSet::new();
    let mut all_truth = Vec::new();
    for pair in &test {
        let p_c = correction_forward(&pair.repaired, &model.ema, &config)?;
        let t_c = decode_correction(&p_c, &config.vocab, &pair.repaired)?;
        let conf = evaluation_forward(&pair.repaired, &t_c, &model.ema, &config)?;
        let flagged = detect_errors(&conf, threshold);
        counts.merge(&tally_confusion(&flagged, &pair.labels)?);
        let base = all_truth.len();
        for &p in &flagged {
            all_flagged.insert(base + p);
        }
        all_truth.extend(pair.labels.iter().copied());
    }

    let scores = confusion_scores(&counts);
    println!("\nheld-out detection at threshold {threshold}:");
    println!("  TP={} FP={} TN={} FN={}", counts.tp, counts.fp, counts.tn, counts.fn_);
    println!("  accuracy  {}", na(scores.accuracy));
    println!("  precision {}", na(scores.precision));
    println!("  recall    {}", na(scores.recall));
    println!("  f1        {}", na(scores.f1));
    println!(
        "  detection probability {}",
        na(detection_probability(&all_flagged, &all_truth))
    );
    Ok(())
}
