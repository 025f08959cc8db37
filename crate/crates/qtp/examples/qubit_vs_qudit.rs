//! Compare classical bits, qubit superdense coding, and qudit (d = 4)
//! superdense coding under the same bit-flip noise strength. Fewer
//! channel uses per character means fewer chances for corruption, so
//! mean sentence error rates order qudit4 <= qubit <= classical.
//!
//! ```bash
//! cargo run -p qtp --example qubit_vs_qudit
//! ```

use rand::Rng;

use qtp::codec::{channel_uses, TransmitMode};
use qtp::quantum::{ChannelConfig, ChannelKind};
use qtp::rng::{SeedStreams, StreamPurpose};
use qtp::text::{Stage, TextStage};
use qtp::transmit::{transmit_text, Link};

const VOCAB: &[&str] = &[
    "signal", "carrier", "frame", "header", "payload", "buffer", "packet", "relay", "router",
    "uplink", "antenna", "filter", "decoder", "sender", "receiver", "channel", "noise", "code",
];

fn main() -> anyhow::Result<()> {
    let streams = SeedStreams::new(31);
    let mut rng = streams.stream(StreamPurpose::Corpus, 0);
    let sentences: Vec<TextStage> = (0..60)
        .map(|_| {
            let n = rng.random_range(6..=12);
            let s = (0..n)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect::<Vec<_>>()
                .join(" ");
            TextStage::parse(Stage::Ideal, &s)
        })
        .collect();

    let lambda = 0.01;
    let replicates = 10;
    println!("bit-flip noise at lambda = {lambda}, {replicates} replicates\n");
    println!("{:<10} {:>14} {:>10}", "mode", "uses/sentence", "mean SER");

    for mode in [
        TransmitMode::Classical,
        TransmitMode::Qubit,
        TransmitMode::Qudit4,
    ] {
        let config = ChannelConfig::new(ChannelKind::BitFlip, lambda, 2);
        let link = Link::resolve(&config, mode)?;
        let mut ser_sum = 0.0;
        for rep in 0..replicates {
            let rstreams = SeedStreams::new(streams.child_seed(StreamPurpose::Replicate, rep));
            let mut wrong = 0usize;
            for (i, ideal) in sentences.iter().enumerate() {
                let tx = transmit_text(
                    ideal,
                    &link,
                    &mut rstreams.stream(StreamPurpose::Transmit, i as u32),
                )?;
                if tx.received.words() != ideal.words() {
                    wrong += 1;
                }
            }
            ser_sum += wrong as f64 / sentences.len() as f64;
        }
        let uses = channel_uses(sentences[0].char_len(), mode);
        println!(
            "{:<10} {:>14} {:>10.4}",
            mode.as_str(),
            uses,
            ser_sum / replicates as f64
        );
    }
    Ok(())
}
