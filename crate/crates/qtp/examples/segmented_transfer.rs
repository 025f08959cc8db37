//! Complete vs segmented transfer: the same long passage sent as one
//! block and as 5–16-word units. Small units keep each corruption local,
//! which is where the sentence-level corrector works best.
//!
//! ```bash
//! cargo run -p qtp --example segmented_transfer
//! ```

use rand::Rng;

use qtp::codec::{normalize_display, segment_text, TransmitMode};
use qtp::model::{
    correction_forward, decode_correction, evaluation_forward, fuse, ModelConfig, ModelSettings,
    Vocab,
};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::text::{Stage, TextStage};
use qtp::trainer::{generate_noisy_corpus, train, TrainConfig};
use qtp::transmit::{transmit_text, Link};
use qtp::word_repair::{repair_text, Dictionary};

const PASSAGE: &str = "strive not to be a success but rather to be of value the true \
measure of success is how many times you can bounce back from failure life is like \
riding a bicycle to keep your balance you must keep moving";

const EXTRA: &[&str] = &[
    "to be of value is the true measure",
    "you must keep moving to keep your balance",
    "life is like riding a bicycle",
    "strive to bounce back from failure",
    "success is not the measure of value",
    "how many times can you bounce back",
    "keep moving and keep your balance",
    "a bicycle must keep moving",
    "the true measure is how you keep moving",
    "not success but value",
];

fn main() -> anyhow::Result<()> {
    let streams = SeedStreams::new(606);
    let channel = ChannelConfig::new(ChannelKind::BitFlip, 0.01, 2);
    let link = Link::resolve(&channel, TransmitMode::Qubit)?;

    // train on unit-sized variations of the passage vocabulary
    let mut rng = streams.stream(StreamPurpose::Corpus, 31337);
    let mut corpus: Vec<String> = EXTRA.iter().map(|s| s.to_string()).collect();
    let words: Vec<&str> = PASSAGE.split_whitespace().collect();
    for _ in 0..140 {
        let n = rng.random_range(5..=12);
        let start = rng.random_range(0..words.len() - n);
        corpus.push(words[start..start + n].join(" "));
    }
    let dict = Dictionary::from_corpus(corpus.iter().map(String::as_str))?;
    let pairs = generate_noisy_corpus(&corpus, &link, &dict, &streams, 0)?;
    let config = ModelConfig::with_settings(
        Vocab::from_dictionary(&dict),
        ModelSettings {
            num_blocks: 2,
            d_model: 32,
            heads: 4,
            ffn_dim: 64,
            max_len: 48,
        },
    );
    let tcfg = TrainConfig {
        epochs: 12,
        ema_decay: 0.8,
        ..TrainConfig::default()
    };
    println!("training on {} unit-sized samples...\n", pairs.len());
    let model = train(&pairs, &config, &tcfg, &streams)?;

    let ideal = TextStage::parse(Stage::Ideal, PASSAGE);
    println!(
        "passage: {} words, {} chars\n",
        ideal.word_count(),
        ideal.char_len()
    );

    let post = |t_w: &TextStage| -> anyhow::Result<TextStage> {
        let p_c = correction_forward(t_w, &model.ema, &config)?;
        let t_c = decode_correction(&p_c, &config.vocab, t_w)?;
        let conf = evaluation_forward(t_w, &t_c, &model.ema, &config)?;
        Ok(fuse(t_w, &t_c, &conf, 0.5)?)
    };

    // complete transfer: the whole passage as one block
    let tx = transmit_text(&ideal, &link, &mut streams.stream(StreamPurpose::Transmit, 0))?;
    let (t_w, _) = repair_text(&tx.received, &dict)?;
    let complete = post(&t_w)?;
    let errors = |t: &TextStage| {
        ideal
            .words()
            .iter()
            .zip(t.words())
            .filter(|(a, b)| a != b)
            .count()
    };
    println!("complete transfer:");
    println!("  received: {}", normalize_display(&tx.received.render()));
    println!("  final:    {}", normalize_display(&complete.render()));
    println!("  word errors: {} received, {} final\n", errors(&tx.received), errors(&complete));

    // segmented transfer: 5–16-word units, each corrected on its own
    let plan = segment_text(&ideal, 16)?;
    let mut final_words = Vec::new();
    let mut received_words = Vec::new();
    for (ui, &(start, end)) in plan.unit_bounds.iter().enumerate() {
        let unit = ideal.slice_words(Stage::Ideal, start, end);
        let tx = transmit_text(
            &unit,
            &link,
            &mut streams.stream(StreamPurpose::Transmit, 100 + ui as u32),
        )?;
        let (t_w, _) = repair_text(&tx.received, &dict)?;
        let fused = post(&t_w)?;
        received_words.extend(tx.received.words().to_vec());
        final_words.extend(fused.words().to_vec());
    }
    let received = ideal.with_words(Stage::Received, received_words);
    let fused = ideal.with_words(Stage::Fused, final_words);
    println!("segmented transfer ({} units):", plan.unit_count());
    println!("  received: {}", normalize_display(&received.render()));
    println!("  final:    {}", normalize_display(&fused.render()));
    println!(
        "  word errors: {} received, {} final",
        errors(&received),
        errors(&fused)
    );
    Ok(())
}
